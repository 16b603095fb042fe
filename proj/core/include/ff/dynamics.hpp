#pragma once

#include "ff/motion.hpp"
#include "ff/nn/checkpoint.hpp"
#include "ff/nn/layers.hpp"
#include "ff/nn/optim.hpp"
#include "ff/nn/standardizer.hpp"
#include "ff/synth.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ff::dynamics {

struct Link {
  double mass = 1.0;     // kg
  double length = 1.0;   // m
  double com = 0.5;      // m from the proximal joint
  double inertia = 0.0;  // kg m^2 about the CoM
};

/// Planar serial chain with a fixed base. Joint angles are relative to the
/// previous link; q = 0 everywhere hangs the chain straight down.
struct LinkageModel {
  std::vector<Link> links;
  double gravity = 9.81;

  Index size() const noexcept { return static_cast<Index>(links.size()); }
  void validate() const;

  static LinkageModel pendulum(double mass, double length, double com, double inertia, double gravity = 9.81);
  /// Thigh, shank, foot with adult anthropometric proportions.
  static LinkageModel leg();
};

/// Recursive Newton-Euler inverse dynamics; angles in radians.
Eigen::VectorXd analytic_id(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const Eigen::VectorXd& qdd,
                            const LinkageModel& model);
/// Joint-space mass matrix M(q).
Eigen::MatrixXd mass_matrix(const Eigen::VectorXd& q, const LinkageModel& model);
/// Solves M(q) qdd = tau - C(q, qd) - G(q).
Eigen::VectorXd analytic_fd(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const Eigen::VectorXd& tau,
                            const LinkageModel& model);
/// Kinetic plus gravitational potential energy (zero potential at the base height).
double mechanical_energy(const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const LinkageModel& model);
/// Base-relative joint positions (k+1 points, the last is the chain tip); x forward, y up.
std::vector<Eigen::Vector2d> joint_positions(const Eigen::VectorXd& q, const LinkageModel& model);

/// One chain driven by named motion channels. `offsets_deg` are added to the
/// channel angles before the chain sees them.
struct ChainAssignment {
  LinkageModel model;
  std::vector<std::string> channels;
  std::vector<double> offsets_deg;
};

/// Maps every joint channel of a motion onto exactly one chain.
struct BodyModel {
  std::vector<ChainAssignment> chains;

  /// Sagittal hip/knee/ankle leg chain plus an independent pendulum per
  /// remaining joint channel.
  static BodyModel standard(const std::vector<std::string>& joint_names);
  void validate(const ChannelSpec& channels) const;
};

/// Per-channel central differences (one-sided at the ends), angles in degrees
/// converted to radians, then per-frame analytic_id. Requires T >= 3.
Matrix torques_from_angles(const Matrix& angles_deg, double frame_rate, const LinkageModel& model,
                           const std::vector<double>& offsets_deg = {});
TorqueSequence torques_from_motion(const MotionSequence& seq, const BodyModel& body);

/// Torques in the tempo-normalized domain: each stance is differentiated on
/// its original frames with a clock rescaled so the stance lasts n_norm
/// nominal frames, then encoded with the stance FrameMap.
TorqueSequence normalized_torques(const MotionSequence& seq, const StanceSegmentation& seg, const BodyModel& body,
                                  Index n_norm = 300);

enum class Direction { ID, FD };
std::string direction_name(Direction d);
Direction direction_from_name(const std::string& name);

struct SurrogateConfig {
  Direction direction = Direction::ID;
  Index n_blocks = 3;
  Index n_heads = 10;
  Index width = 40;
  Index ffn_width = 80;
  Index window = 64;
  Index stride = 32;
  void validate() const;
};

struct TrainConfig {
  int epochs = 30;
  Index batch = 16;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  Index max_windows_per_epoch = 1024;
  Index max_validation_windows = 256;
  nn::PlateauConfig plateau{};
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  double best_val_loss = 0.0;
  std::vector<double> lr;
};

using nn::Standardizer;

/// Paired training sequences; each input/target pair shares the frame count.
struct SequencePairs {
  std::vector<Matrix> inputs;
  std::vector<Matrix> targets;
};

/// Transformer surrogate for inverse (angles -> torques) or forward
/// (torques -> angles) dynamics over joint channels only.
class Surrogate {
 public:
  Surrogate() = default;
  Surrogate(SurrogateConfig config, std::vector<std::string> channels, std::uint64_t seed);

  /// Windowed inference with tent-weighted cross-fade over 50% overlaps.
  Matrix infer(const Matrix& x) const;
  /// Raw standardized forward pass on one window.
  Matrix infer_window(const Matrix& x) const;

  const SurrogateConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& channels() const noexcept { return channels_; }
  Index channel_count() const noexcept { return static_cast<Index>(channels_.size()); }
  nn::TransformerNet& net() noexcept { return net_; }
  Standardizer& input_stats() noexcept { return in_stats_; }
  Standardizer& output_stats() noexcept { return out_stats_; }
  std::uint64_t seed() const noexcept { return seed_; }

  nn::Checkpoint to_checkpoint() const;
  static Surrogate from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& base) const;
  static Surrogate load(const std::filesystem::path& base);

 private:
  SurrogateConfig config_;
  std::vector<std::string> channels_;
  std::uint64_t seed_ = 0;
  nn::TransformerNet net_;
  Standardizer in_stats_;
  Standardizer out_stats_;
};

/// Window start offsets covering `frames` with the given window and stride;
/// the last window is aligned to the end. A sequence shorter than the window
/// yields a single start at 0.
std::vector<Index> window_starts(Index frames, Index window, Index stride);

/// Trains on fixed windows drawn from the training pairs; validation uses the
/// validation pairs. Parameters are restored to the best validation epoch.
Surrogate train_surrogate(const SequencePairs& train, const SequencePairs& validation,
                          const SurrogateConfig& config, const TrainConfig& train_config,
                          const std::vector<std::string>& channels, TrainReport* report = nullptr);

/// Tempo-normalized (angles, torques) pairs for every subject and state.
/// Stances from `DatasetSplit::first_validation_stance` on go to validation.
struct DynamicsCorpus {
  SequencePairs train;       // input = angles, target = torques
  SequencePairs validation;  // same orientation
  std::vector<std::string> channels;
};
DynamicsCorpus build_dynamics_corpus(const DatasetBundle& bundle, const BodyModel& body, Index n_norm = 300);

/// Swaps input/target roles as required by `direction`.
SequencePairs oriented(const SequencePairs& angles_to_torques, Direction direction);

Surrogate train_surrogate(const DatasetBundle& bundle, const BodyModel& body, const SurrogateConfig& config,
                          const TrainConfig& train_config, TrainReport* report = nullptr);

/// Applies a surrogate to the joint channels of a motion (ID) or to a torque
/// sequence (FD). Root channels never enter the network.
TorqueSequence infer_torques(const Surrogate& id, const MotionSequence& motion);
Matrix infer_angles(const Surrogate& fd, const TorqueSequence& torques);

}  // namespace ff::dynamics
