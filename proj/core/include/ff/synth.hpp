#pragma once

#include "ff/motion.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ff {

enum class FatigueState { NonFatigued, Fatigued };

std::string_view state_name(FatigueState s) noexcept;

struct Range {
  double min = 0.0;
  double max = 0.0;
};

/// Per-joint sampling ranges for the synthetic gait generator.
struct JointGaitRanges {
  std::string name;
  Range amplitude;        // deg
  Range phase;            // rad
  Range offset;           // deg
  Range fatigue_scale;    // amplitude multiplier in (0, 2]
  Range fatigue_shift;    // |baseline shift|, deg
  bool shift_random_sign = true;
};

struct GeneratorConfig {
  std::vector<JointGaitRanges> joints;
  /// Joint whose phase is pinned to 0 so each stance starts on an upward
  /// crossing of its offset; the threshold segmenter keys on it.
  std::string contact_channel = "knee_angle_r";
  Range stance_period_mean{56.0, 68.0};  // frames
  Range stance_period_jitter{1.0, 2.5};  // frames (std-dev)
  Range jitter_multiplier{2.0, 4.0};
  Range step_length{0.60, 0.75};         // m per stance
  Range fatigue_step_scale{0.85, 0.97};
  double stride_amplitude_cv = 0.03;
  double stride_offset_sd = 0.5;  // deg
  double frame_rate = 128.0;
  Index max_stance_frames = 300;

  static GeneratorConfig defaults();
  void validate() const;
};

struct FatigueDeltas {
  std::vector<double> amplitude_scale;  // per joint, (0, 2]
  std::vector<double> baseline_shift;   // per joint, deg
  double jitter_multiplier = 1.0;       // >= 1
  double step_scale = 1.0;
};

/// Subject-specific sinusoidal gait model for both fatigue states.
struct GaitProfile {
  SubjectId subject;
  std::vector<std::string> joints;
  std::vector<double> amplitude;  // deg
  std::vector<double> phase;      // rad
  std::vector<double> offset;     // deg
  double stance_period_mean = 60.0;
  double stance_period_jitter = 0.0;
  double stride_amplitude_cv = 0.0;
  double stride_offset_sd = 0.0;
  double step_length = 0.7;
  double frame_rate = 128.0;
  Index max_stance_frames = 300;
  std::string contact_channel = "knee_angle_r";
  FatigueDeltas fatigue;

  void validate() const;
  /// Channel offset in the given state (the threshold for contact detection).
  double offset_in(Index joint, FatigueState state) const;
  double amplitude_in(Index joint, FatigueState state) const;
  Index joint_index(const std::string& name) const;

  bool operator==(const GaitProfile&) const = default;
};

GaitProfile generate_subject_profile(std::uint64_t seed, SubjectId subject, const GeneratorConfig& config);

struct GeneratedGait {
  MotionSequence motion;
  StanceSegmentation segmentation;
};

GeneratedGait generate_gait(const GaitProfile& profile, FatigueState state, Index n_strides, std::uint64_t seed);

struct DatasetSplit {
  double validation_fraction = 0.2;
  /// Stances [first_validation_stance(n), n) are held out.
  Index first_validation_stance(Index stance_count) const;
};

struct SubjectRecord {
  SubjectId subject;
  MotionSequence nonfatigued;
  MotionSequence fatigued;
  StanceSegmentation segmentation_nf;
  StanceSegmentation segmentation_f;
  std::optional<GaitProfile> profile;

  const MotionSequence& motion(FatigueState s) const { return s == FatigueState::Fatigued ? fatigued : nonfatigued; }
  const StanceSegmentation& segmentation(FatigueState s) const {
    return s == FatigueState::Fatigued ? segmentation_f : segmentation_nf;
  }
};

struct DatasetBundle {
  std::vector<SubjectRecord> subjects;
  DatasetSplit split;
  std::uint64_t seed = 0;
  Index n_strides = 0;
  std::optional<GeneratorConfig> config;

  int subject_count() const noexcept { return static_cast<int>(subjects.size()); }
  const SubjectRecord& subject(SubjectId id) const;
  void validate() const;
};

DatasetBundle build_dataset(int n_subjects, Index n_strides, std::uint64_t seed,
                            const GeneratorConfig& config = GeneratorConfig::defaults());

/// Writes `subject_<id>/{nonfatigued,fatigued}.csv` plus `manifest.json`.
/// Throws if `dir` exists and is non-empty unless `force` is set.
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir, bool force = false);

/// Loads a dataset directory through its manifest. Entries carrying explicit
/// `boundaries` use provided segmentation; others are segmented by threshold
/// on the manifest's contact channel.
DatasetBundle ingest_external_csv(const std::filesystem::path& dir,
                                  const std::filesystem::path& manifest = "manifest.json");

}  // namespace ff
