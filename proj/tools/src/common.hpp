#pragma once

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ff/motion.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ffusion {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestSchema = 1;
inline constexpr const char* kDataEnv = "FATIGUEFUSION_DATA";

/// $FATIGUEFUSION_DATA, or ./ffdata.
fs::path default_data_root();
fs::path checkpoint_path(const fs::path& data_root, const std::string& model);

std::vector<double> parse_doubles(const std::string& csv);
std::vector<ff::Index> parse_indices(const std::string& csv);
std::vector<std::uint64_t> parse_seeds(const std::string& csv);

/// Reproduction record written atomically next to a run's outputs.
class RunManifest {
 public:
  RunManifest(std::string subcommand, const CLI::App& app);

  void seed(std::uint64_t s) { seeds_.push_back(s); }
  void input(const fs::path& p) { inputs_.push_back(p.string()); }
  void output(const fs::path& p) { outputs_.push_back(p.string()); }
  void extra(const std::string& key, json value) { extra_[key] = std::move(value); }
  void write(const fs::path& path) const;

 private:
  std::string subcommand_;
  json config_;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::string> inputs_, outputs_;
  json extra_ = json::object();
  std::chrono::steady_clock::time_point start_;
};

/// `<file>.run.json` for file outputs, `<dir>/run_manifest.json` for directories.
fs::path manifest_path_for(const fs::path& output, bool is_dir);

void register_gen_data(CLI::App& app);
void register_train(CLI::App& app);
void register_synth(CLI::App& app);
void register_intensity(CLI::App& app);
void register_eval(CLI::App& app);
void register_ablate(CLI::App& app);

}  // namespace ffusion
