#pragma once

#include "ff/motion.hpp"
#include "ff/nn/checkpoint.hpp"
#include "ff/nn/layers.hpp"
#include "ff/nn/optim.hpp"
#include "ff/nn/standardizer.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ff::latent {

inline constexpr double kProfileEpsilon = 1e-3;

/// Fatigued-to-non-fatigued torque ratio with a signed denominator floor.
struct FatigueProfile {
  Matrix ratio;
  SubjectId subject;
};

FatigueProfile compute_fatigue_profile(const TorqueSequence& t_nf, const TorqueSequence& t_f, SubjectId subject,
                                       double eps = kProfileEpsilon);

/// z = mu + exp(log_sigma) * eps with eps ~ N(0, I) drawn from `noise_seed`.
Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& log_sigma, std::uint64_t noise_seed);

/// sum_n W_n z_n; W must be a valid weight vector of the same length.
Eigen::VectorXd fuse_latents(const std::vector<Eigen::VectorXd>& z, const std::vector<double>& weights);

/// Converts tempo-normalized stance sequences (S*n_norm x J) to flattened,
/// per-channel standardized stance windows (S x window*J) and back.
struct WindowCodec {
  Index n_norm = 300;
  Index window = 60;
  nn::Standardizer stats;

  Index channels() const noexcept { return stats.channels(); }
  Index features() const noexcept { return window * channels(); }
  Index stance_count(const Matrix& normalized) const;
  Matrix to_windows(const Matrix& normalized) const;
  Matrix from_windows(const Matrix& windows) const;

  static WindowCodec fit(const std::vector<Matrix>& normalized, Index n_norm = 300, Index window = 60);
  void store(nn::Checkpoint& ckpt) const;
  static WindowCodec restore(const nn::Checkpoint& ckpt);
};

/// Stance-aligned training pair for the CVAE: both sequences tempo-normalized
/// with the same stance count.
struct LabeledPair {
  Matrix nonfatigued;
  Matrix fatigued;
  SubjectId subject;
};

struct CvaeConfig {
  int n_subjects = 16;
  Index latent = 16;
  Index embed = 8;
  std::vector<Index> hidden{128, 64};
};

struct CvaeTrainConfig {
  int epochs = 50;
  Index batch = 32;
  double lr = 1e-3;
  nn::KlWarmup warmup{0.5, 20};
  nn::PlateauConfig plateau{};
  std::uint64_t seed = 1;
  /// Std-dev of a random per-window, per-channel offset added to the
  /// non-fatigued condition during training (standardized units).
  double condition_jitter = 2.0;
};

struct CvaeTrainReport {
  std::vector<double> loss, recon, kl, beta, lr;
  std::vector<double> val_recon, val_kl;
  double initial_recon = 0.0;  // training reconstruction MSE before the first update
  double final_recon = 0.0;    // training reconstruction MSE after the last epoch
};

class CvaeModel {
 public:
  struct Encoded {
    Matrix mu;
    Matrix log_sigma;
  };

  CvaeModel() = default;
  CvaeModel(const CvaeConfig& config, WindowCodec codec, std::uint64_t seed);

  /// Windows are standardized rows from the codec.
  Encoded encode(const Matrix& fatigued, const Matrix& nonfatigued, const std::vector<int>& labels) const;
  Matrix decode(const Matrix& z, const Matrix& nonfatigued, const std::vector<int>& labels) const;

  const CvaeConfig& config() const noexcept { return config_; }
  const WindowCodec& codec() const noexcept { return codec_; }
  nn::Parameter& embedding() noexcept { return embedding_; }
  nn::Mlp& encoder() noexcept { return encoder_; }
  nn::Mlp& decoder() noexcept { return decoder_; }
  nn::ParamList parameters();
  std::uint64_t seed() const noexcept { return seed_; }
  void check_label(SubjectId label) const;

  nn::Checkpoint to_checkpoint() const;
  static CvaeModel from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& base) const;
  static CvaeModel load(const std::filesystem::path& base);

  /// Inputs to the encoder / decoder with the embedding rows appended.
  Matrix encoder_input(const Matrix& fatigued, const Matrix& nonfatigued, const std::vector<int>& labels) const;
  Matrix decoder_input(const Matrix& z, const Matrix& nonfatigued, const std::vector<int>& labels) const;

 private:
  CvaeConfig config_;
  WindowCodec codec_;
  std::uint64_t seed_ = 0;
  nn::Parameter embedding_;
  nn::Mlp encoder_;  // -> [mu, log_sigma]
  nn::Mlp decoder_;
};

/// Reconstruction MSE (standardized units) of decode(mu, ...) over all windows.
double cvae_reconstruction_mse(const CvaeModel& model, const Matrix& nf, const Matrix& f, const std::vector<int>& labels);

CvaeModel cvae_train(const std::vector<LabeledPair>& train, const std::vector<LabeledPair>& validation,
                     const CvaeConfig& config, const CvaeTrainConfig& train_config,
                     CvaeTrainReport* report = nullptr);

/// Generates a fatigued torque sequence in the normalized domain, one latent
/// sample per stance window. `z` has one row per stance.
TorqueSequence cvae_generate(const CvaeModel& model, const TorqueSequence& t_nf, SubjectId label, const Matrix& z);
/// Samples z ~ N(0, I) per stance from `seed`.
TorqueSequence cvae_generate(const CvaeModel& model, const TorqueSequence& t_nf, SubjectId label, std::uint64_t seed);

struct FusionAeConfig {
  std::vector<Index> hidden{128, 64};
  Index latent = 16;
};

struct FusionAeTrainConfig {
  int epochs = 20;
  Index batch = 32;
  double lr = 1e-3;
  nn::PlateauConfig plateau{};
  std::uint64_t seed = 1;
};

struct FusionAeTrainReport {
  std::vector<double> loss, val_loss, lr;
  double initial_val_mse = 0.0;
};

class FusionAeModel {
 public:
  FusionAeModel() = default;
  FusionAeModel(const FusionAeConfig& config, WindowCodec codec, std::uint64_t seed);

  /// Latent rows are [per-channel window means (J), learned code (latent)].
  /// The means pass through linearly; the code describes the mean-removed window.
  Matrix encode(const Matrix& windows) const;
  Matrix decode(const Matrix& z) const;
  Index latent_size() const noexcept { return codec_.channels() + config_.latent; }
  /// Latent rows, one per stance of a normalized torque sequence.
  Matrix encode_sequence(const Matrix& normalized) const;
  Matrix decode_sequence(const Matrix& z) const;

  const FusionAeConfig& config() const noexcept { return config_; }
  const WindowCodec& codec() const noexcept { return codec_; }
  nn::Mlp& encoder() noexcept { return encoder_; }
  nn::Mlp& decoder() noexcept { return decoder_; }
  nn::ParamList parameters();
  /// Reconstruction MSE on held-out sequences, raw torque units at n_norm resolution.
  double validation_mse() const noexcept { return validation_mse_; }
  void set_validation_mse(double v) noexcept { validation_mse_ = v; }

  nn::Checkpoint to_checkpoint() const;
  static FusionAeModel from_checkpoint(const nn::Checkpoint& ckpt);
  void save(const std::filesystem::path& base) const;
  static FusionAeModel load(const std::filesystem::path& base);

 private:
  FusionAeConfig config_;
  WindowCodec codec_;
  std::uint64_t seed_ = 0;
  nn::Mlp encoder_;
  nn::Mlp decoder_;
  double validation_mse_ = 0.0;
};

/// Mean squared reconstruction error (raw units, n_norm resolution) over sequences.
double fusionae_reconstruction_mse(const FusionAeModel& model, const std::vector<Matrix>& normalized);

/// Trains on normalized torque sequences. The codec is fitted to `train`
/// unless `codec` is given (e.g. shared with the CVAE).
FusionAeModel fusionae_train(const std::vector<Matrix>& train, const std::vector<Matrix>& validation,
                             const FusionAeConfig& config, const FusionAeTrainConfig& train_config,
                             const WindowCodec* codec = nullptr, FusionAeTrainReport* report = nullptr);

/// decode(W_1 enc(a) + W_2 enc(b)) per stance window.
TorqueSequence fusion_pipeline(const FusionAeModel& model, const TorqueSequence& a, const TorqueSequence& b,
                               const std::vector<double>& weights);

/// Per-frame weights [1 - w2(t), w2(t)] over the normalized frames. Each
/// downsampled window frame is decoded from latents fused with the weight at
/// its normalized position.
TorqueSequence dynamic_fusion(const FusionAeModel& model, const TorqueSequence& a, const TorqueSequence& b,
                              const std::vector<double>& w2, bool require_monotone = true);

/// w2(t) = t / (n - 1) for t in [0, n).
std::vector<double> linear_ramp(Index n);

}  // namespace ff::latent
