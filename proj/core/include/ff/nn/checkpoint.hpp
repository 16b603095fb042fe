#pragma once

#include "ff/nn/layers.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace ff::nn {

/// A JSON manifest plus named float64 tensors. On disk: `<base>.json` holds
/// the manifest and a tensor table {name, rows, cols, offset}; `<base>.bin`
/// holds the little-endian row-major data at those byte offsets.
struct Checkpoint {
  nlohmann::json manifest = nlohmann::json::object();
  std::vector<std::pair<std::string, Matrix>> tensors;

  void put(const std::string& name, const Matrix& m);
  const Matrix& get(const std::string& name) const;
  bool has(const std::string& name) const;

  void put_params(const ParamList& params, const std::string& prefix);
  /// Copies stored values into `params` (shapes must match) and bumps versions.
  void get_params(const ParamList& params, const std::string& prefix) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& base);
Checkpoint load_checkpoint(const std::filesystem::path& base);

/// `<base>.json` for a base path given with or without the extension.
std::filesystem::path checkpoint_json_path(const std::filesystem::path& base);
std::filesystem::path checkpoint_bin_path(const std::filesystem::path& base);

}  // namespace ff::nn
