#include "ff/tempo.hpp"

#include "ff/error.hpp"
#include "ff/io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace ff::tempo {

std::vector<Index> FrameMap::durations() const {
  std::vector<Index> d;
  for (const auto& s : stances) d.push_back(static_cast<Index>(s.size()));
  return d;
}

Index FrameMap::original_frames() const {
  Index total = 0;
  for (const auto& s : stances) total += static_cast<Index>(s.size());
  return total;
}

void FrameMap::validate() const {
  require(n_norm >= 2, ErrorCode::InvalidArgument, "frame map n_norm must be >= 2");
  require(!stances.empty(), ErrorCode::Segmentation, "frame map has no stances");
  for (std::size_t s = 0; s < stances.size(); ++s) {
    const auto& st = stances[s];
    require(st.size() >= 2, ErrorCode::Segmentation, "frame map stance " + std::to_string(s) + " has < 2 frames");
    require(st.front().second == 0 && st.back().second == n_norm - 1, ErrorCode::Segmentation,
            "frame map stance " + std::to_string(s) + " is not endpoint-anchored");
    for (std::size_t i = 0; i < st.size(); ++i) {
      require(st[i].first == static_cast<Index>(i), ErrorCode::Segmentation, "frame map original indices must be 0..d-1");
      if (i > 0)
        require(st[i].second > st[i - 1].second, ErrorCode::Segmentation,
                "frame map stance " + std::to_string(s) + " is not strictly increasing");
    }
  }
}

std::string FrameMap::to_json() const {
  nlohmann::json j;
  j["n_norm"] = n_norm;
  j["stances"] = nlohmann::json::array();
  for (const auto& st : stances) {
    auto arr = nlohmann::json::array();
    for (auto [o, n] : st) arr.push_back({o, n});
    j["stances"].push_back(arr);
  }
  return j.dump();
}

FrameMap FrameMap::from_json(const std::string& text) {
  FrameMap map;
  try {
    auto j = nlohmann::json::parse(text);
    map.n_norm = j.at("n_norm").get<Index>();
    for (const auto& st : j.at("stances")) {
      std::vector<std::pair<Index, Index>> pairs;
      for (const auto& p : st) pairs.emplace_back(p.at(0).get<Index>(), p.at(1).get<Index>());
      map.stances.push_back(std::move(pairs));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("frame map: ") + e.what());
  }
  map.validate();
  return map;
}

void save_frame_map(const FrameMap& map, const std::filesystem::path& path) {
  io::write_text_atomic(path, map.to_json() + "\n");
}

FrameMap load_frame_map(const std::filesystem::path& path) { return FrameMap::from_json(io::read_text(path)); }

FrameMap build_frame_map(const StanceSegmentation& seg, Index n_norm) {
  require(seg.stance_count() > 0, ErrorCode::Segmentation, "empty segmentation");
  require(n_norm >= 2, ErrorCode::InvalidArgument, "n_norm must be >= 2");
  FrameMap map;
  map.n_norm = n_norm;
  for (Index s = 0; s < seg.stance_count(); ++s) {
    const Index d = seg.duration(s);
    require(d >= 2, ErrorCode::Segmentation, "stance " + std::to_string(s) + " has fewer than 2 frames");
    require(d <= n_norm, ErrorCode::Segmentation,
            "stance " + std::to_string(s) + " has " + std::to_string(d) + " frames, longer than n_norm=" +
                std::to_string(n_norm));
    std::vector<std::pair<Index, Index>> pairs;
    Index prev = -1;
    for (Index i = 0; i < d; ++i) {
      auto k = static_cast<Index>(
          std::llround(static_cast<double>(i) * static_cast<double>(n_norm - 1) / static_cast<double>(d - 1)));
      if (k <= prev) k = prev + 1;
      pairs.emplace_back(i, k);
      prev = k;
    }
    map.stances.push_back(std::move(pairs));
  }
  map.validate();
  return map;
}

Matrix encode_with_map(const Matrix& data, const FrameMap& map) {
  map.validate();
  require(data.rows() == map.original_frames(), ErrorCode::ShapeMismatch,
          "sequence has " + std::to_string(data.rows()) + " frames, frame map covers " +
              std::to_string(map.original_frames()));
  const Index n = map.n_norm;
  Matrix out(map.stance_count() * n, data.cols());
  Index src = 0;
  for (Index s = 0; s < map.stance_count(); ++s) {
    const auto& st = map.stances[static_cast<std::size_t>(s)];
    const Index base = s * n;
    for (std::size_t i = 0; i + 1 < st.size(); ++i) {
      const Index ka = st[i].second, kb = st[i + 1].second;
      const auto a = data.row(src + static_cast<Index>(i));
      const auto b = data.row(src + static_cast<Index>(i) + 1);
      out.row(base + ka) = a;
      for (Index k = ka + 1; k < kb; ++k) {
        const double alpha = static_cast<double>(k - ka) / static_cast<double>(kb - ka);
        out.row(base + k) = (1.0 - alpha) * a + alpha * b;
      }
    }
    out.row(base + st.back().second) = data.row(src + static_cast<Index>(st.size()) - 1);
    src += static_cast<Index>(st.size());
  }
  return out;
}

Matrix decode_with_map(const Matrix& normalized, const FrameMap& map) {
  map.validate();
  require(normalized.rows() == map.stance_count() * map.n_norm, ErrorCode::ShapeMismatch,
          "normalized sequence has " + std::to_string(normalized.rows()) + " frames, frame map expects " +
              std::to_string(map.stance_count() * map.n_norm));
  Matrix out(map.original_frames(), normalized.cols());
  Index dst = 0;
  for (Index s = 0; s < map.stance_count(); ++s)
    for (auto [orig, norm] : map.stances[static_cast<std::size_t>(s)]) {
      (void)orig;
      out.row(dst++) = normalized.row(s * map.n_norm + norm);
    }
  return out;
}

namespace {

// Samples `len` uniformly spaced positions over normalized stance rows [base, base+n).
void resample_into(const Matrix& src, Index base, Index n, Index len, Matrix& dst, Index dst_base) {
  for (Index i = 0; i < len; ++i) {
    const double pos = len == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(n - 1) / static_cast<double>(len - 1);
    auto lo = static_cast<Index>(std::floor(pos));
    if (lo >= n - 1) lo = n - 1;
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0 || lo == n - 1)
      dst.row(dst_base + i) = src.row(base + lo);
    else
      dst.row(dst_base + i) = (1.0 - frac) * src.row(base + lo) + frac * src.row(base + lo + 1);
  }
}

}  // namespace

Matrix retime(const Matrix& normalized, const TempoProfile& tempo) {
  const auto S = static_cast<Index>(tempo.durations.size());
  require(S > 0, ErrorCode::InvalidArgument, "tempo profile is empty");
  require(normalized.rows() % S == 0, ErrorCode::ShapeMismatch,
          "normalized frame count " + std::to_string(normalized.rows()) + " is not a multiple of the " +
              std::to_string(S) + " tempo stances");
  const Index n = normalized.rows() / S;
  require(n >= 2, ErrorCode::ShapeMismatch, "normalized stances must have >= 2 frames");
  Index total = 0;
  for (auto d : tempo.durations) {
    require(d >= 2, ErrorCode::InvalidArgument, "tempo durations must be >= 2 frames");
    total += d;
  }
  Matrix out(total, normalized.cols());
  Index dst = 0;
  for (Index s = 0; s < S; ++s) {
    const Index d = tempo.durations[static_cast<std::size_t>(s)];
    resample_into(normalized, s * n, n, d, out, dst);
    dst += d;
  }
  return out;
}

Matrix resample_stances(const Matrix& data, Index from_len, Index to_len) {
  require(from_len >= 2 && to_len >= 2, ErrorCode::InvalidArgument, "stance lengths must be >= 2");
  require(data.rows() % from_len == 0, ErrorCode::ShapeMismatch,
          "frame count " + std::to_string(data.rows()) + " is not a multiple of stance length " +
              std::to_string(from_len));
  const Index S = data.rows() / from_len;
  Matrix out(S * to_len, data.cols());
  for (Index s = 0; s < S; ++s) resample_into(data, s * from_len, from_len, to_len, out, s * to_len);
  return out;
}

std::pair<MotionSequence, FrameMap> encode_normalize(const MotionSequence& seq, const StanceSegmentation& seg,
                                                     Index n_norm) {
  require(seg.total_frames() == seq.frames(), ErrorCode::ShapeMismatch, "segmentation does not cover the sequence");
  auto map = build_frame_map(seg, n_norm);
  return {encode_with_map(seq, map), std::move(map)};
}

MotionSequence encode_with_map(const MotionSequence& seq, const FrameMap& map) {
  return MotionSequence(seq.channels(), encode_with_map(seq.data(), map), seq.frame_rate());
}

TorqueSequence encode_with_map(const TorqueSequence& seq, const FrameMap& map) {
  return TorqueSequence(seq.channels(), encode_with_map(seq.data(), map), seq.frame_rate());
}

MotionSequence decode_with_map(const MotionSequence& normalized, const FrameMap& map) {
  return MotionSequence(normalized.channels(), decode_with_map(normalized.data(), map), normalized.frame_rate());
}

TorqueSequence decode_with_map(const TorqueSequence& normalized, const FrameMap& map) {
  return TorqueSequence(normalized.channels(), decode_with_map(normalized.data(), map), normalized.frame_rate());
}

MotionSequence retime(const MotionSequence& normalized, const TempoProfile& tempo) {
  return MotionSequence(normalized.channels(), retime(normalized.data(), tempo), normalized.frame_rate());
}

TorqueSequence retime(const TorqueSequence& normalized, const TempoProfile& tempo) {
  return TorqueSequence(normalized.channels(), retime(normalized.data(), tempo), normalized.frame_rate());
}

TempoProfile extract_tempo_profile(const StanceSegmentation& seg) {
  require(seg.stance_count() > 0, ErrorCode::Segmentation, "empty segmentation");
  return TempoProfile{seg.durations()};
}

}  // namespace ff::tempo
