#pragma once

#include "ff/nn/layers.hpp"

#include <vector>

namespace ff::nn {

struct LossGrad {
  double value = 0.0;
  Matrix grad;
};

/// Mean squared error over all entries; grad is d(value)/d(pred).
LossGrad mse_loss(const Matrix& pred, const Matrix& target);

/// Sum over dims of 0.5*(mu^2 + sigma^2 - 1 - 2 log sigma) for one sample.
double kl_gaussian(const Eigen::VectorXd& mu, const Eigen::VectorXd& log_sigma);

struct KlGrad {
  double value = 0.0;
  Matrix d_mu;
  Matrix d_log_sigma;
};

/// KL(N(mu, sigma^2) || N(0, I)) summed over latent dims, averaged over rows.
KlGrad kl_to_standard_normal(const Matrix& mu, const Matrix& log_sigma);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  /// Applies one bias-corrected update from each parameter's grad and bumps
  /// its version. The parameter list must keep the same shapes between calls.
  void step(const ParamList& params);

  double learning_rate() const noexcept { return config_.lr; }
  void set_learning_rate(double lr) noexcept { config_.lr = lr; }
  long steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  AdamConfig config_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

struct PlateauConfig {
  int patience = 5;
  double factor = 0.5;
  double min_lr = 1e-5;
  double threshold = 1e-4;  // relative improvement that resets patience
};

/// Reduce-on-plateau learning-rate schedule driven by validation loss.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(PlateauConfig config = {});
  double step(double val_loss, double lr);
  double best() const noexcept { return best_; }

 private:
  PlateauConfig config_;
  double best_;
  int bad_epochs_ = 0;
};

/// Linear KL weight ramp: beta(e) = max_beta * min(1, e / ramp_epochs).
struct KlWarmup {
  double max_beta = 0.5;
  int ramp_epochs = 20;
  double beta(int epoch) const;
};

}  // namespace ff::nn
