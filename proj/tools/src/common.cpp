#include "common.hpp"

#include "ff/error.hpp"
#include "ff/io.hpp"

#include <cstdlib>

namespace ffusion {

fs::path default_data_root() {
  if (const char* env = std::getenv(kDataEnv); env && *env) return env;
  return "ffdata";
}

fs::path checkpoint_path(const fs::path& data_root, const std::string& model) {
  return data_root / "checkpoints" / model;
}

namespace {

template <class T, class F>
std::vector<T> parse_list(const std::string& csv, F&& convert) {
  std::vector<T> out;
  for (auto tok : ff::io::split(csv, ',')) {
    tok = ff::io::trim(tok);
    if (tok.empty()) continue;
    out.push_back(convert(std::string(tok)));
  }
  return out;
}

}  // namespace

std::vector<double> parse_doubles(const std::string& csv) {
  return parse_list<double>(csv, [](const std::string& t) {
    double v = 0.0;
    ff::require(ff::io::parse_double(t, v), ff::ErrorCode::Parse, "not a number: '" + t + "'");
    return v;
  });
}

std::vector<ff::Index> parse_indices(const std::string& csv) {
  return parse_list<ff::Index>(csv, [](const std::string& t) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(t, &used);
      ff::require(used == t.size(), ff::ErrorCode::Parse, "not an integer: '" + t + "'");
      return static_cast<ff::Index>(v);
    } catch (const std::logic_error&) {
      ff::fail(ff::ErrorCode::Parse, "not an integer: '" + t + "'");
    }
  });
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> out;
  for (auto v : parse_indices(csv)) {
    ff::require(v >= 0, ff::ErrorCode::InvalidArgument, "seeds must be >= 0");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

RunManifest::RunManifest(std::string subcommand, const CLI::App& app)
    : subcommand_(std::move(subcommand)), config_(json::object()), start_(std::chrono::steady_clock::now()) {
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "-h") continue;
    std::string key = opt->get_name();
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    if (opt->count() > 0) {
      const auto& r = opt->results();
      config_[key] = r.size() == 1 ? json(r.front()) : json(r);
    } else if (!opt->get_default_str().empty()) {
      config_[key] = opt->get_default_str();
    }
  }
  if (const char* env = std::getenv(kDataEnv)) config_["env." + std::string(kDataEnv)] = env;
}

void RunManifest::write(const fs::path& path) const {
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  json j{{"schema_version", kManifestSchema},
         {"tool", "ffusion"},
         {"tool_version", kToolVersion},
         {"subcommand", subcommand_},
         {"config", config_},
         {"seeds", seeds_},
         {"inputs", inputs_},
         {"outputs", outputs_},
         {"wall_clock_seconds", seconds}};
  for (const auto& [k, v] : extra_.items()) j[k] = v;
  ff::io::write_text_atomic(path, j.dump(2) + "\n");
}

fs::path manifest_path_for(const fs::path& output, bool is_dir) {
  if (is_dir) return output / "run_manifest.json";
  fs::path p = output;
  p += ".run.json";
  return p;
}

}  // namespace ffusion
