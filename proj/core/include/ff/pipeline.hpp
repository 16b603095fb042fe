#pragma once

#include "ff/dynamics.hpp"
#include "ff/intensity.hpp"
#include "ff/latent.hpp"
#include "ff/motion.hpp"
#include "ff/tempo.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ff::pipeline {

/// Least-squares polynomial smoothing of every column. Window edges use the
/// polynomial fitted to the first/last `window` samples. window == 1 is the identity.
Matrix savitzky_golay(const Matrix& data, Index window, Index order);

struct PostProcessSettings {
  Index sg_window = 9;
  Index sg_order = 3;
  bool foot_lock = true;
  double foot_lock_tolerance = 0.01;  // m of stance-foot drift per stance
  double contact_fraction = 0.6;      // leading share of each stance with the foot planted
  void validate() const;
};

/// Largest horizontal (x/z) drift of the planted foot over any stance, in m.
/// Zero when the motion lacks the leg channels.
double max_foot_drift(const MotionSequence& seq, const StanceSegmentation& seg, double contact_fraction);

/// Savitzky-Golay smoothing of every channel, then (if enabled and `seg` is
/// given) root x/z re-integration so the planted foot stays put.
MotionSequence post_process(const MotionSequence& seq, const PostProcessSettings& settings,
                            const StanceSegmentation* seg = nullptr);

struct CheckpointPaths {
  std::filesystem::path id, fd, cvae, fusion;
};

struct Models {
  dynamics::Surrogate id;
  dynamics::Surrogate fd;
  latent::CvaeModel cvae;
  latent::FusionAeModel fusion;

  static Models load(const CheckpointPaths& paths);
  /// Throws ErrorCode::Stage unless all four models agree on the joint channels.
  void check_compatible(const std::vector<std::string>& joints) const;
};

struct PipelineConfig {
  Index n_norm = tempo::kDefaultNormFrames;
  intensity::IntensityJob intensity;  // lambda, shaping mode and rates; the floor comes from ControlParams
  PostProcessSettings post;
  std::uint64_t seed = 1;  // CVAE latent sampling
};

/// Named intermediate artifacts: Q_dot_nf, T_nf, T_hat_f, T_hat_f_plus,
/// T_hat_prime_f, Q_hat_prime_f.
struct PipelineTrace {
  struct Entry {
    std::string symbol;
    ChannelSpec channels;
    Matrix data;
    double frame_rate = 0.0;
  };
  std::vector<Entry> entries;

  void put(const std::string& symbol, const ChannelSpec& channels, const Matrix& data, double frame_rate);
  bool has(const std::string& symbol) const;
  const Entry& get(const std::string& symbol) const;
  /// One CSV per artifact, named by symbol.
  void dump(const std::filesystem::path& dir) const;
};

/// Cycles or truncates K to `stances` entries.
tempo::TempoProfile fit_tempo(const std::vector<Index>& k, Index stances);

/// Normalized-domain step sizes: a stance of d original frames spans
/// d / frame_rate seconds over n_norm normalized frames.
std::vector<double> normalized_step_sizes(const StanceSegmentation& seg, double frame_rate, Index n_norm);

/// tempo encode -> ID -> CVAE -> [intensity] -> FusionAE -> FD -> tempo decode
/// -> post-processing. `partner` is the non-fatigued torque sequence fused
/// with the CVAE output (normalized domain); defaults to the input's own T_nf.
MotionSequence run_fatiguefusion(const MotionSequence& q_nf, const StanceSegmentation& seg, const ControlParams& c,
                                 const Models& models, const PipelineConfig& cfg, PipelineTrace* trace = nullptr,
                                 const TorqueSequence* partner = nullptr);

/// Dynamic fusion with per-normalized-frame weights `w2` (empty: linear ramp
/// over the whole sequence). When intensity is enabled the floor falls from 1
/// to u along `floor_ramp` (empty: same as `w2`).
MotionSequence run_progressive(const MotionSequence& q_nf, const StanceSegmentation& seg, const ControlParams& c,
                               const Models& models, const PipelineConfig& cfg, std::vector<double> w2 = {},
                               std::vector<double> floor_ramp = {}, PipelineTrace* trace = nullptr,
                               const TorqueSequence* partner = nullptr);

/// Brings a normalized torque sequence to `stances` stances by cycling or truncating.
Matrix match_stances(const Matrix& normalized, Index n_norm, Index stances);

/// Tempo-normalized torques per subject (index = label), from the ID
/// surrogate or, when `id` is null, the analytic body model.
struct TorqueCorpus {
  std::vector<TorqueSequence> nonfatigued;
  std::vector<TorqueSequence> fatigued;
  /// Stance-aligned CVAE pairs over the common stance count, split by DatasetSplit.
  std::vector<latent::LabeledPair> train;
  std::vector<latent::LabeledPair> validation;
};
TorqueCorpus build_torque_corpus(const DatasetBundle& bundle, const dynamics::Surrogate* id,
                                 Index n_norm = tempo::kDefaultNormFrames);

/// FusionAE training sequences: both states of every pair, plus one CVAE
/// sample per training pair when `cvae` is given.
struct FusionCorpus {
  std::vector<Matrix> train;
  std::vector<Matrix> validation;
};
FusionCorpus build_fusion_corpus(const TorqueCorpus& corpus, const latent::CvaeModel* cvae, std::uint64_t seed);

/// Input reference in a job file: a motion CSV with provided or threshold
/// segmentation, or a subject/state of a dataset directory.
struct MotionInput {
  std::filesystem::path motion;
  std::optional<std::vector<Index>> boundaries;
  SegmentationParams segmentation;
  std::filesystem::path dataset;
  int subject = -1;
  std::string state = "nonfatigued";

  /// Relative paths resolve against `base`.
  std::pair<MotionSequence, StanceSegmentation> load(const std::filesystem::path& base) const;
};

struct PipelineJob {
  enum class Mode { Static, Progressive };
  Mode mode = Mode::Static;
  MotionInput input;
  std::optional<MotionInput> partner;
  ControlParams control;
  std::optional<MotionInput> tempo_from;  // K taken from this motion's segmentation
  CheckpointPaths checkpoints;
  PipelineConfig config;
  std::vector<double> ramp;        // progressive: per normalized frame, empty = linear
  std::vector<double> floor_ramp;  // progressive
  std::filesystem::path output;
  std::filesystem::path trace_dir;
};

/// Parses a job; relative paths resolve against `base`.
PipelineJob pipeline_job_from_json(const nlohmann::json& j, const std::filesystem::path& base);

/// Loads models and inputs of a job and runs it. Nothing is written.
MotionSequence run_job(const PipelineJob& job, const std::filesystem::path& base, PipelineTrace* trace = nullptr);

}  // namespace ff::pipeline
