#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ff {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ChannelKind { JointAngle, RootTranslation };

/// Ordered channel layout of a motion or torque matrix. Joint channels carry
/// degrees (angles) or N*m (torques); root channels carry meters.
class ChannelSpec {
 public:
  ChannelSpec() = default;
  ChannelSpec(std::vector<std::string> names, std::vector<ChannelKind> kinds);

  /// Joint channels followed by the three root translations.
  static ChannelSpec motion(const std::vector<std::string>& joints);
  static ChannelSpec joints_only(const std::vector<std::string>& joints);

  Index size() const noexcept { return static_cast<Index>(names_.size()); }
  const std::string& name(Index i) const { return names_.at(static_cast<std::size_t>(i)); }
  ChannelKind kind(Index i) const { return kinds_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::vector<Index> joint_indices() const;
  std::vector<Index> root_indices() const;
  std::vector<std::string> joint_names() const;
  Index joint_count() const;
  std::optional<Index> index_of(const std::string& name) const;

  bool operator==(const ChannelSpec&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<ChannelKind> kinds_;
};

/// T x (J+3) joint angles plus root translation. Immutable after construction.
class MotionSequence {
 public:
  MotionSequence(ChannelSpec channels, Matrix data, double frame_rate);

  const ChannelSpec& channels() const noexcept { return channels_; }
  const Matrix& data() const noexcept { return data_; }
  double frame_rate() const noexcept { return frame_rate_; }
  Index frames() const noexcept { return data_.rows(); }

  Matrix joint_data() const;
  Matrix root_data() const;

  bool operator==(const MotionSequence& o) const {
    return channels_ == o.channels_ && frame_rate_ == o.frame_rate_ && data_ == o.data_;
  }

 private:
  ChannelSpec channels_;
  Matrix data_;
  double frame_rate_;
};

/// T x J generalized joint torques aligned to a MotionSequence.
class TorqueSequence {
 public:
  TorqueSequence(ChannelSpec channels, Matrix data, double frame_rate);

  const ChannelSpec& channels() const noexcept { return channels_; }
  const Matrix& data() const noexcept { return data_; }
  double frame_rate() const noexcept { return frame_rate_; }
  Index frames() const noexcept { return data_.rows(); }

  bool operator==(const TorqueSequence& o) const {
    return channels_ == o.channels_ && frame_rate_ == o.frame_rate_ && data_ == o.data_;
  }

 private:
  ChannelSpec channels_;
  Matrix data_;
  double frame_rate_;
};

/// Stance-phase start frames over a sequence of `total_frames`. The first
/// boundary is always 0 and durations sum to the frame count.
class StanceSegmentation {
 public:
  StanceSegmentation(std::vector<Index> boundaries, Index total_frames);
  static StanceSegmentation from_durations(const std::vector<Index>& durations);

  const std::vector<Index>& boundaries() const noexcept { return boundaries_; }
  std::vector<Index> durations() const;
  Index stance_count() const noexcept { return static_cast<Index>(boundaries_.size()); }
  Index total_frames() const noexcept { return total_frames_; }
  Index start(Index s) const { return boundaries_.at(static_cast<std::size_t>(s)); }
  Index duration(Index s) const;

  bool operator==(const StanceSegmentation&) const = default;

 private:
  std::vector<Index> boundaries_;
  Index total_frames_ = 0;
};

struct SubjectId {
  int value = 0;
  bool operator==(const SubjectId&) const = default;
  auto operator<=>(const SubjectId&) const = default;
};

/// The control variables {label, fusion weights, tempo, intensity floor}.
struct ControlParams {
  SubjectId label;
  std::vector<double> fusion_weights{0.0, 1.0};
  std::vector<Index> tempo;  // empty: keep the input's own timing
  double intensity_floor = 1.0;
  bool intensity_enabled = false;

  void validate(int n_subjects) const;
};

/// Throws ErrorCode::Weights unless every weight is >= 0 and they sum to 1 within 1e-9.
void validate_fusion_weights(const std::vector<double>& weights);

MotionSequence load_motion_csv(const std::filesystem::path& path);
void save_motion_csv(const MotionSequence& seq, const std::filesystem::path& path);
TorqueSequence load_torque_csv(const std::filesystem::path& path);
void save_torque_csv(const TorqueSequence& seq, const std::filesystem::path& path);

enum class SegmentationMethod { Threshold, Provided };

struct SegmentationParams {
  SegmentationMethod method = SegmentationMethod::Threshold;
  std::string contact_channel;  // threshold method
  double threshold = 0.0;
  Index hysteresis = 2;         // frames the signal must stay at/above threshold
  Index min_stance_frames = 4;
  std::vector<Index> boundaries;  // provided method
};

StanceSegmentation segment_stances(const MotionSequence& seq, const SegmentationParams& params);

}  // namespace ff
