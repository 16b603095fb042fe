#include "ff/nn/checkpoint.hpp"

#include "ff/error.hpp"
#include "ff/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ff::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are written in native little-endian order");

void Checkpoint::put(const std::string& name, const Matrix& m) {
  for (auto& [n, t] : tensors)
    if (n == name) {
      t = m;
      return;
    }
  tensors.emplace_back(name, m);
}

const Matrix& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  fail(ErrorCode::MissingCheckpoint, "checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

void Checkpoint::put_params(const ParamList& params, const std::string& prefix) {
  for (const auto* p : params) put(prefix + p->name, p->value);
}

void Checkpoint::get_params(const ParamList& params, const std::string& prefix) const {
  for (auto* p : params) {
    const Matrix& m = get(prefix + p->name);
    require(m.rows() == p->value.rows() && m.cols() == p->value.cols(), ErrorCode::ShapeMismatch,
            "checkpoint tensor '" + prefix + p->name + "' has shape " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()) + ", model expects " + std::to_string(p->value.rows()) + "x" +
                std::to_string(p->value.cols()));
    p->value = m;
    p->zero_grad();
    ++p->version;
  }
}

std::filesystem::path checkpoint_json_path(const std::filesystem::path& base) {
  auto p = base;
  if (p.extension() == ".json" || p.extension() == ".bin") p.replace_extension();
  p += ".json";
  return p;
}

std::filesystem::path checkpoint_bin_path(const std::filesystem::path& base) {
  auto p = base;
  if (p.extension() == ".json" || p.extension() == ".bin") p.replace_extension();
  p += ".bin";
  return p;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& base) {
  const auto json_path = checkpoint_json_path(base);
  const auto bin_path = checkpoint_bin_path(base);
  nlohmann::json doc = ckpt.manifest;
  doc["format"] = "fatiguefusion.checkpoint/1";
  doc["blob"] = bin_path.filename().string();
  auto table = nlohmann::json::array();
  std::string blob;
  for (const auto& [name, m] : ckpt.tensors) {
    require(m.allFinite(), ErrorCode::NonFinite, "refusing to save non-finite tensor '" + name + "'");
    table.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", blob.size()}});
    const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(double);
    const auto at = blob.size();
    blob.resize(at + bytes);
    if (bytes) std::memcpy(blob.data() + at, m.data(), bytes);
  }
  doc["tensors"] = table;
  doc["blob_bytes"] = blob.size();
  io::write_text_atomic(bin_path, blob);
  io::write_text_atomic(json_path, doc.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& base) {
  const auto json_path = checkpoint_json_path(base);
  const auto bin_path = checkpoint_bin_path(base);
  require(std::filesystem::exists(json_path), ErrorCode::MissingCheckpoint,
          "checkpoint not found: " + json_path.string());
  require(std::filesystem::exists(bin_path), ErrorCode::MissingCheckpoint,
          "checkpoint blob not found: " + bin_path.string());
  Checkpoint ckpt;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_text(json_path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, json_path.string() + ": " + e.what());
  }
  const std::string blob = io::read_text(bin_path);
  try {
    for (const auto& t : doc.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("rows").get<Index>();
      const auto cols = t.at("cols").get<Index>();
      const auto offset = t.at("offset").get<std::size_t>();
      const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
      require(rows >= 0 && cols >= 0 && offset + bytes <= blob.size(), ErrorCode::Parse,
              "tensor '" + name + "' lies outside the checkpoint blob");
      Matrix m(rows, cols);
      if (bytes) std::memcpy(m.data(), blob.data() + offset, bytes);
      ckpt.tensors.emplace_back(name, std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, json_path.string() + ": " + e.what());
  }
  doc.erase("tensors");
  doc.erase("blob");
  doc.erase("blob_bytes");
  doc.erase("format");
  ckpt.manifest = std::move(doc);
  return ckpt;
}

}  // namespace ff::nn
