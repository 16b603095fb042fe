#pragma once

#include "ff/motion.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace ff::intensity {

/// Motor-unit pools in %MVC.
struct ThreeCompartmentState {
  double active = 0.0;
  double fatigued = 0.0;
  double resting = 100.0;

  double total() const noexcept { return active + fatigued + resting; }
  void validate() const;
  bool operator==(const ThreeCompartmentState&) const = default;
};

/// Rates in 1/s.
struct CcParams {
  double fatigue = 0.0146;   // F
  double recovery = 0.0022;  // R
  double develop = 10.0;     // L_D
  double relax = 10.0;       // L_R
  void validate() const;
};

/// One explicit-Euler step with target load `tl` (%MVC), followed by
/// clamping to [0, 100] and renormalization to a total of 100.
ThreeCompartmentState step_3cc(const ThreeCompartmentState& state, double tl, const CcParams& params, double dt);

/// M_F after each step, starting from (0, 0, 100).
std::vector<double> simulate_fatigue(const std::vector<double>& tl, const CcParams& params, double dt);
/// Per-frame step sizes.
std::vector<double> simulate_fatigue(const std::vector<double>& tl, const CcParams& params,
                                     const std::vector<double>& dt);
/// Independent state per column of a T x J load matrix.
Matrix simulate_fatigue(const Matrix& tl, const CcParams& params, const std::vector<double>& dt);

/// 100 - lambda * M_F.
double residual_capacity(double m_f, double lambda);

enum class ShapingMode { Literal, RemainingCapacity };
std::string shaping_mode_name(ShapingMode m);
ShapingMode shaping_mode_from_name(const std::string& name);

/// Literal: 1 - rc/100. RemainingCapacity: rc/100.
double shape_rc(double rc, ShapingMode mode);

/// Joint-specific lambda in [0, 1]; a single entry applies to every joint.
struct LambdaConfig {
  std::vector<double> lambda{1.0};
  double at(Index joint) const;
  void validate(Index joints) const;
};

struct IntensityConfig {
  double floor = 0.6;  // u
  ShapingMode mode = ShapingMode::RemainingCapacity;
  void validate() const;
};

/// T x J factors max(shape_rc(residual_capacity(M_F, lambda_j)), u).
Matrix intensity_factors(const Matrix& m_f, const LambdaConfig& lambda, const IntensityConfig& config);

/// `m_f` is T x J (one state per joint) or T x 1 (shared state).
TorqueSequence apply_intensity(const TorqueSequence& t_f, const Matrix& m_f, const LambdaConfig& lambda,
                               const IntensityConfig& config);

/// |T_f| divided by the per-joint 95th percentile of |T_nf|, in %MVC,
/// clamped to [0, 100].
Matrix target_load(const TorqueSequence& t_f, const TorqueSequence& t_nf);

/// Parameters of the intensity stage as read from a job file.
struct IntensityJob {
  LambdaConfig lambda;
  IntensityConfig config;
  CcParams rates;
};

IntensityJob intensity_job_from_json(const nlohmann::json& j);
nlohmann::json intensity_job_to_json(const IntensityJob& job);

/// `frame,<channel>...` rows of the factor series.
void save_factor_csv(const Matrix& factors, const ChannelSpec& channels, const std::filesystem::path& path);

}  // namespace ff::intensity
