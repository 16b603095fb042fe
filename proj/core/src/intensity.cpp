#include "ff/intensity.hpp"

#include "ff/error.hpp"
#include "ff/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace ff::intensity {

void ThreeCompartmentState::validate() const {
  for (double v : {active, fatigued, resting})
    require(std::isfinite(v) && v >= 0.0 && v <= 100.0, ErrorCode::InvalidArgument,
            "3CC compartment outside [0, 100]: " + io::format_double(v));
  require(std::abs(total() - 100.0) <= 1e-6, ErrorCode::InvalidArgument,
          "3CC compartments sum to " + io::format_double(total()) + ", not 100");
}

void CcParams::validate() const {
  for (double v : {fatigue, recovery, develop, relax})
    require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidArgument, "3CC rates must be finite and >= 0");
}

ThreeCompartmentState step_3cc(const ThreeCompartmentState& s, double tl, const CcParams& p, double dt) {
  require(std::isfinite(dt) && dt > 0.0, ErrorCode::InvalidArgument,
          "3CC step needs dt > 0, got " + io::format_double(dt));
  require(std::isfinite(tl) && tl >= 0.0 && tl <= 100.0, ErrorCode::InvalidArgument,
          "target load outside [0, 100] %MVC: " + io::format_double(tl));
  // Recruitment is limited by the resting pool.
  const double c = s.active < tl ? p.develop * std::min(tl - s.active, s.resting) : p.relax * (tl - s.active);
  double a = s.active + dt * (c - p.fatigue * s.active);
  double f = s.fatigued + dt * (p.fatigue * s.active - p.recovery * s.fatigued);
  double r = s.resting + dt * (-c + p.recovery * s.fatigued);
  a = std::clamp(a, 0.0, 100.0);
  f = std::clamp(f, 0.0, 100.0);
  r = std::clamp(r, 0.0, 100.0);
  const double sum = a + f + r;
  require(sum > 0.0 && std::isfinite(sum), ErrorCode::NonFinite, "3CC state collapsed; reduce dt");
  const double k = 100.0 / sum;
  return {a * k, f * k, r * k};
}

std::vector<double> simulate_fatigue(const std::vector<double>& tl, const CcParams& params,
                                     const std::vector<double>& dt) {
  require(dt.size() == tl.size(), ErrorCode::ShapeMismatch, "one step size per load sample is required");
  params.validate();
  std::vector<double> out;
  out.reserve(tl.size());
  ThreeCompartmentState s;
  for (std::size_t t = 0; t < tl.size(); ++t) {
    s = step_3cc(s, tl[t], params, dt[t]);
    out.push_back(s.fatigued);
  }
  return out;
}

std::vector<double> simulate_fatigue(const std::vector<double>& tl, const CcParams& params, double dt) {
  return simulate_fatigue(tl, params, std::vector<double>(tl.size(), dt));
}

Matrix simulate_fatigue(const Matrix& tl, const CcParams& params, const std::vector<double>& dt) {
  Matrix out(tl.rows(), tl.cols());
  for (Index j = 0; j < tl.cols(); ++j) {
    std::vector<double> col(static_cast<std::size_t>(tl.rows()));
    for (Index t = 0; t < tl.rows(); ++t) col[static_cast<std::size_t>(t)] = tl(t, j);
    const auto mf = simulate_fatigue(col, params, dt);
    for (Index t = 0; t < tl.rows(); ++t) out(t, j) = mf[static_cast<std::size_t>(t)];
  }
  return out;
}

double residual_capacity(double m_f, double lambda) {
  require(m_f >= 0.0 && m_f <= 100.0, ErrorCode::InvalidArgument, "M_F outside [0, 100]: " + io::format_double(m_f));
  require(lambda >= 0.0 && lambda <= 1.0, ErrorCode::InvalidArgument,
          "lambda outside [0, 1]: " + io::format_double(lambda));
  return 100.0 - lambda * m_f;
}

std::string shaping_mode_name(ShapingMode m) { return m == ShapingMode::Literal ? "literal" : "remaining_capacity"; }

ShapingMode shaping_mode_from_name(const std::string& name) {
  if (name == "literal") return ShapingMode::Literal;
  if (name == "remaining_capacity") return ShapingMode::RemainingCapacity;
  fail(ErrorCode::InvalidArgument, "unknown shaping mode '" + name + "' (expected literal or remaining_capacity)");
}

double shape_rc(double rc, ShapingMode mode) {
  require(rc >= 0.0 && rc <= 100.0, ErrorCode::InvalidArgument, "RC outside [0, 100]: " + io::format_double(rc));
  // -exp(log(x)) + 1 with x = rc / 100
  return mode == ShapingMode::Literal ? 1.0 - rc / 100.0 : rc / 100.0;
}

double LambdaConfig::at(Index joint) const { return lambda.size() == 1 ? lambda[0] : lambda.at(static_cast<std::size_t>(joint)); }

void LambdaConfig::validate(Index joints) const {
  require(lambda.size() == 1 || static_cast<Index>(lambda.size()) == joints, ErrorCode::ShapeMismatch,
          "lambda needs 1 or " + std::to_string(joints) + " entries, got " + std::to_string(lambda.size()));
  for (double l : lambda)
    require(l >= 0.0 && l <= 1.0, ErrorCode::InvalidArgument, "lambda outside [0, 1]: " + io::format_double(l));
}

void IntensityConfig::validate() const {
  require(floor >= 0.0 && floor <= 1.0, ErrorCode::InvalidArgument,
          "intensity floor u outside [0, 1]: " + io::format_double(floor));
}

Matrix intensity_factors(const Matrix& m_f, const LambdaConfig& lambda, const IntensityConfig& config) {
  lambda.validate(m_f.cols());
  config.validate();
  Matrix out(m_f.rows(), m_f.cols());
  for (Index t = 0; t < m_f.rows(); ++t)
    for (Index j = 0; j < m_f.cols(); ++j)
      out(t, j) = std::max(shape_rc(residual_capacity(m_f(t, j), lambda.at(j)), config.mode), config.floor);
  return out;
}

TorqueSequence apply_intensity(const TorqueSequence& t_f, const Matrix& m_f, const LambdaConfig& lambda,
                               const IntensityConfig& config) {
  const Index T = t_f.frames(), J = t_f.data().cols();
  require(m_f.rows() == T, ErrorCode::ShapeMismatch,
          "M_F series has " + std::to_string(m_f.rows()) + " samples for " + std::to_string(T) + " frames");
  require(m_f.cols() == J || m_f.cols() == 1, ErrorCode::ShapeMismatch, "M_F needs one column or one per joint");
  lambda.validate(J);
  Matrix per_joint = m_f.cols() == J ? m_f : Matrix(m_f.replicate(1, J));
  return TorqueSequence(t_f.channels(), intensity_factors(per_joint, lambda, config).cwiseProduct(t_f.data()),
                        t_f.frame_rate());
}

Matrix target_load(const TorqueSequence& t_f, const TorqueSequence& t_nf) {
  require(t_f.data().cols() == t_nf.data().cols(), ErrorCode::ShapeMismatch, "torque channel counts differ");
  Matrix out(t_f.frames(), t_f.data().cols());
  for (Index j = 0; j < out.cols(); ++j) {
    std::vector<double> mag(static_cast<std::size_t>(t_nf.frames()));
    for (Index t = 0; t < t_nf.frames(); ++t) mag[static_cast<std::size_t>(t)] = std::abs(t_nf.data()(t, j));
    std::sort(mag.begin(), mag.end());
    const double pos = 0.95 * static_cast<double>(mag.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, mag.size() - 1);
    const double p95 = mag[lo] + (pos - static_cast<double>(lo)) * (mag[hi] - mag[lo]);
    for (Index t = 0; t < out.rows(); ++t)
      out(t, j) = p95 > 0.0 ? std::clamp(100.0 * std::abs(t_f.data()(t, j)) / p95, 0.0, 100.0) : 0.0;
  }
  return out;
}

IntensityJob intensity_job_from_json(const nlohmann::json& j) {
  IntensityJob job;
  try {
    if (j.contains("lambda")) {
      const auto& l = j.at("lambda");
      job.lambda.lambda = l.is_array() ? l.get<std::vector<double>>() : std::vector<double>{l.get<double>()};
    }
    job.config.floor = j.value("u", job.config.floor);
    if (j.contains("mode")) job.config.mode = shaping_mode_from_name(j.at("mode").get<std::string>());
    if (j.contains("rates")) {
      const auto& r = j.at("rates");
      job.rates.fatigue = r.value("F", job.rates.fatigue);
      job.rates.recovery = r.value("R", job.rates.recovery);
      job.rates.develop = r.value("L_D", job.rates.develop);
      job.rates.relax = r.value("L_R", job.rates.relax);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, std::string("intensity job: ") + e.what());
  }
  require(!job.lambda.lambda.empty(), ErrorCode::InvalidArgument, "intensity job has an empty lambda list");
  for (double l : job.lambda.lambda)
    require(l >= 0.0 && l <= 1.0, ErrorCode::InvalidArgument, "lambda outside [0, 1]: " + io::format_double(l));
  job.config.validate();
  job.rates.validate();
  return job;
}

nlohmann::json intensity_job_to_json(const IntensityJob& job) {
  return {{"lambda", job.lambda.lambda},
          {"u", job.config.floor},
          {"mode", shaping_mode_name(job.config.mode)},
          {"rates", {{"F", job.rates.fatigue}, {"R", job.rates.recovery}, {"L_D", job.rates.develop}, {"L_R", job.rates.relax}}}};
}

void save_factor_csv(const Matrix& factors, const ChannelSpec& channels, const std::filesystem::path& path) {
  require(factors.cols() == channels.size(), ErrorCode::ShapeMismatch, "factor columns do not match channels");
  std::vector<std::string> header{"frame"};
  std::vector<std::vector<double>> cols(1);
  for (Index t = 0; t < factors.rows(); ++t) cols[0].push_back(static_cast<double>(t));
  for (Index j = 0; j < factors.cols(); ++j) {
    header.push_back(channels.name(j));
    auto& c = cols.emplace_back();
    for (Index t = 0; t < factors.rows(); ++t) c.push_back(factors(t, j));
  }
  io::write_table_csv(path, header, cols);
}

}  // namespace ff::intensity
