#include "ff/nn/optim.hpp"

#include "ff/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ff::nn {

LossGrad mse_loss(const Matrix& pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), ErrorCode::ShapeMismatch,
          "mse: prediction " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) + " vs target " +
              std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
  require(pred.size() > 0, ErrorCode::InvalidArgument, "mse of an empty matrix");
  const double n = static_cast<double>(pred.size());
  Matrix diff = pred - target;
  LossGrad out;
  out.value = diff.squaredNorm() / n;
  out.grad = diff * (2.0 / n);
  return out;
}

double kl_gaussian(const Eigen::VectorXd& mu, const Eigen::VectorXd& log_sigma) {
  require(mu.size() == log_sigma.size(), ErrorCode::ShapeMismatch, "kl: mu and log_sigma lengths differ");
  require(mu.allFinite() && log_sigma.allFinite(), ErrorCode::NonFinite, "kl: non-finite input");
  return 0.5 * (mu.array().square() + (2.0 * log_sigma.array()).exp() - 1.0 - 2.0 * log_sigma.array()).sum();
}

KlGrad kl_to_standard_normal(const Matrix& mu, const Matrix& log_sigma) {
  require(mu.rows() == log_sigma.rows() && mu.cols() == log_sigma.cols(), ErrorCode::ShapeMismatch,
          "kl: mu and log_sigma shapes differ");
  require(mu.rows() > 0, ErrorCode::InvalidArgument, "kl of an empty batch");
  const double n = static_cast<double>(mu.rows());
  const Eigen::ArrayXXd var = (2.0 * log_sigma.array()).exp();
  KlGrad out;
  out.value = 0.5 * (mu.array().square() + var - 1.0 - 2.0 * log_sigma.array()).sum() / n;
  out.d_mu = mu / n;
  out.d_log_sigma = ((var - 1.0) / n).matrix();
  return out;
}

Adam::Adam(AdamConfig config) : config_(config) {
  require(config.lr > 0.0, ErrorCode::InvalidArgument, "learning rate must be positive");
}

void Adam::step(const ParamList& params) {
  if (m_.empty()) {
    for (auto* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  require(m_.size() == params.size(), ErrorCode::ShapeMismatch, "optimizer state covers a different parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* p = params[i];
    require(p->value.rows() == m_[i].rows() && p->value.cols() == m_[i].cols() && p->grad.rows() == p->value.rows() &&
                p->grad.cols() == p->value.cols(),
            ErrorCode::ShapeMismatch, "parameter '" + p->name + "' does not match its optimizer state");
    require(p->grad.allFinite(), ErrorCode::NonFinite, "non-finite gradient in '" + p->name + "'");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p->grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= config_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.eps);
    ++p->version;
  }
}

PlateauScheduler::PlateauScheduler(PlateauConfig config)
    : config_(config), best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::step(double val_loss, double lr) {
  if (val_loss < best_ * (1.0 - config_.threshold)) {
    best_ = val_loss;
    bad_epochs_ = 0;
    return lr;
  }
  if (++bad_epochs_ > config_.patience) {
    bad_epochs_ = 0;
    return std::max(config_.min_lr, lr * config_.factor);
  }
  return lr;
}

double KlWarmup::beta(int epoch) const {
  if (ramp_epochs <= 0) return max_beta;
  return max_beta * std::min(1.0, static_cast<double>(epoch) / static_cast<double>(ramp_epochs));
}

}  // namespace ff::nn
