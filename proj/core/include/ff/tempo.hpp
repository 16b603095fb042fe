#pragma once

#include "ff/motion.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ff::tempo {

inline constexpr Index kDefaultNormFrames = 300;

/// Per-stance (original local index -> normalized local index) anchors.
struct FrameMap {
  Index n_norm = kDefaultNormFrames;
  std::vector<std::vector<std::pair<Index, Index>>> stances;

  Index stance_count() const noexcept { return static_cast<Index>(stances.size()); }
  std::vector<Index> durations() const;
  Index original_frames() const;
  void validate() const;

  std::string to_json() const;
  static FrameMap from_json(const std::string& text);
  bool operator==(const FrameMap&) const = default;
};

void save_frame_map(const FrameMap& map, const std::filesystem::path& path);
FrameMap load_frame_map(const std::filesystem::path& path);

struct TempoProfile {
  std::vector<Index> durations;
  bool operator==(const TempoProfile&) const = default;
};

/// Anchor placement: original frame i of a stance of length d goes to
/// round(i*(n_norm-1)/(d-1)); a collision pushes the later frame forward by one.
FrameMap build_frame_map(const StanceSegmentation& seg, Index n_norm = kDefaultNormFrames);

/// Matrix-level encoding: anchors copied verbatim, gaps filled by linear interpolation.
Matrix encode_with_map(const Matrix& data, const FrameMap& map);
Matrix decode_with_map(const Matrix& normalized, const FrameMap& map);
Matrix retime(const Matrix& normalized, const TempoProfile& tempo);

std::pair<MotionSequence, FrameMap> encode_normalize(const MotionSequence& seq, const StanceSegmentation& seg,
                                                     Index n_norm = kDefaultNormFrames);
MotionSequence encode_with_map(const MotionSequence& seq, const FrameMap& map);
TorqueSequence encode_with_map(const TorqueSequence& seq, const FrameMap& map);

MotionSequence decode_with_map(const MotionSequence& normalized, const FrameMap& map);
TorqueSequence decode_with_map(const TorqueSequence& normalized, const FrameMap& map);

/// Resamples each normalized stance to `tempo.durations[s]` frames at uniform
/// phase positions (linear interpolation). Stance length is frames / stance count.
MotionSequence retime(const MotionSequence& normalized, const TempoProfile& tempo);
TorqueSequence retime(const TorqueSequence& normalized, const TempoProfile& tempo);

TempoProfile extract_tempo_profile(const StanceSegmentation& seg);

/// Uniform per-stance resampling between two fixed stance lengths, e.g. the
/// 300-frame tempo domain and the 60-frame latent windows.
Matrix resample_stances(const Matrix& data, Index from_len, Index to_len);

}  // namespace ff::tempo
