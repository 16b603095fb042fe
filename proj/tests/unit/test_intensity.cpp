#include "support.hpp"

#include "ff/error.hpp"
#include "ff/intensity.hpp"

#include <catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

using namespace ff;
using namespace ff::intensity;

namespace {

std::vector<double> random_loads(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> tl(n);
  double level = 30.0;
  for (auto& v : tl) {
    if (unit_uniform(rng) < 0.01) level = uniform(rng, 0.0, 100.0);
    v = level;
  }
  return tl;
}

TorqueSequence torques(const Matrix& m) {
  std::vector<std::string> names;
  for (Index j = 0; j < m.cols(); ++j) names.push_back("j" + std::to_string(j));
  return TorqueSequence(ChannelSpec::joints_only(names), m, 128.0);
}

}  // namespace

TEST_CASE("3CC conserves motor units and keeps compartments in range") {
  CcParams p;
  p.fatigue = 0.5;
  p.recovery = 0.05;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ThreeCompartmentState s;
    for (double tl : random_loads(seed, 20000)) {
      s = step_3cc(s, tl, p, 1.0 / 128.0);
      REQUIRE(std::abs(s.total() - 100.0) < 1e-9);
      REQUIRE(s.active >= 0.0);
      REQUIRE(s.fatigued >= 0.0);
      REQUIRE(s.resting >= 0.0);
      REQUIRE(s.active <= 100.0);
      REQUIRE(s.fatigued <= 100.0);
      REQUIRE(s.resting <= 100.0);
    }
  }
}

TEST_CASE("without recovery fatigue never decreases under load") {
  CcParams p;
  p.recovery = 0.0;
  p.fatigue = 0.2;
  Rng rng(3);
  std::vector<double> tl(5000);
  for (auto& v : tl) v = uniform(rng, 1.0, 100.0);
  const auto mf = simulate_fatigue(tl, p, 1.0 / 128.0);
  for (std::size_t t = 1; t < mf.size(); ++t) REQUIRE(mf[t] >= mf[t - 1] - 1e-12);
  CHECK(mf.back() > 0.0);
}

TEST_CASE("active units track a sustained target") {
  CcParams p;
  p.fatigue = 0.0;
  ThreeCompartmentState s;
  for (int i = 0; i < 2000; ++i) s = step_3cc(s, 40.0, p, 1.0 / 128.0);
  CHECK(s.active == Catch::Approx(40.0).margin(1e-6));
  CHECK(s.fatigued == 0.0);
}

TEST_CASE("euler integration converges at first order") {
  CcParams p;
  p.fatigue = 0.8;
  p.recovery = 0.1;
  const double T = 4.0;
  const auto run = [&](int n) {
    ThreeCompartmentState s;
    for (int i = 0; i < n; ++i) s = step_3cc(s, 50.0, p, T / n);
    return s.fatigued;
  };
  const double ref = run(1 << 18);
  const double e1 = std::abs(run(1 << 10) - ref), e2 = std::abs(run(1 << 11) - ref);
  CHECK(e1 / e2 == Catch::Approx(2.0).margin(0.15));
}

TEST_CASE("step validation") {
  CHECK_THROWS_AS(step_3cc({}, 120.0, {}, 0.01), Error);
  CHECK_THROWS_AS(step_3cc({}, 10.0, {}, 0.0), Error);
  CcParams bad;
  bad.fatigue = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(ThreeCompartmentState({50, 50, 50}).validate(), Error);
}

TEST_CASE("residual capacity and shaping") {
  CHECK(residual_capacity(40.0, 0.5) == 80.0);
  CHECK(shape_rc(80.0, ShapingMode::RemainingCapacity) == Catch::Approx(0.8));
  CHECK(shape_rc(80.0, ShapingMode::Literal) == Catch::Approx(0.2));
  CHECK(shape_rc(100.0, ShapingMode::Literal) == 0.0);
  CHECK_THROWS_AS(residual_capacity(10.0, 1.5), Error);
  CHECK(shaping_mode_from_name(shaping_mode_name(ShapingMode::Literal)) == ShapingMode::Literal);
  CHECK_THROWS_AS(shaping_mode_from_name("quadratic"), Error);
}

TEST_CASE("factor is monotone in fatigue and lambda and respects the floor") {
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    const double u = uniform(rng, 0.0, 1.0);
    const double mf1 = uniform(rng, 0.0, 100.0), mf2 = uniform(rng, mf1, 100.0);
    const double l1 = uniform(rng, 0.0, 1.0), l2 = uniform(rng, l1, 1.0);
    const IntensityConfig cfg{u, ShapingMode::RemainingCapacity};
    const auto f = [&](double mf, double l) {
      return intensity_factors(Matrix::Constant(1, 1, mf), LambdaConfig{{l}}, cfg)(0, 0);
    };
    CHECK(f(mf2, l1) <= f(mf1, l1));
    CHECK(f(mf1, l2) <= f(mf1, l1));
    CHECK(f(mf2, l2) >= u);
    CHECK(f(mf1, l1) <= 1.0);
  }
}

TEST_CASE("intensity neutrality and floor clamp") {
  const auto t = torques(fftest::random_matrix(50, 3, 1, 20.0));
  Rng rng(2);
  Matrix mf(50, 3);
  for (Index i = 0; i < mf.size(); ++i) mf.data()[i] = uniform(rng, 0.0, 100.0);
  CHECK(apply_intensity(t, mf, LambdaConfig{{1.0}}, {1.0, ShapingMode::RemainingCapacity}) == t);
  CHECK(apply_intensity(t, mf, LambdaConfig{{0.0}}, {0.6, ShapingMode::RemainingCapacity}) == t);
  const auto sat = apply_intensity(t, Matrix::Constant(50, 3, 100.0), LambdaConfig{{1.0}},
                                   {0.6, ShapingMode::RemainingCapacity});
  CHECK(sat.data() == (0.6 * t.data()).eval());
  const auto shared = apply_intensity(t, Matrix::Constant(50, 1, 100.0), LambdaConfig{{1.0, 0.0, 1.0}},
                                      {0.6, ShapingMode::RemainingCapacity});
  CHECK(shared.data().col(1) == t.data().col(1));
  CHECK(shared.data().col(2) == (0.6 * t.data().col(2)).eval());
  CHECK_THROWS_AS(apply_intensity(t, Matrix::Zero(49, 3), LambdaConfig{}, {}), Error);
  CHECK_THROWS_AS(apply_intensity(t, mf, LambdaConfig{{1.0, 1.0}}, {}), Error);
}

TEST_CASE("target load is scale free and clamped") {
  const Matrix nf = fftest::random_matrix(200, 2, 3, 10.0);
  const Matrix f = fftest::random_matrix(200, 2, 4, 15.0);
  const Matrix a = target_load(torques(f), torques(nf));
  const Matrix b = target_load(torques(7.0 * f), torques(7.0 * nf));
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.maxCoeff() <= 100.0);
  CHECK(target_load(torques(Matrix::Zero(10, 2)), torques(Matrix::Zero(10, 2))).isZero());
}

TEST_CASE("intensity job JSON round trip") {
  const auto job = intensity_job_from_json(nlohmann::json::parse(
      R"({"lambda": [0.2, 1.0], "u": 0.7, "mode": "literal", "rates": {"F": 0.1, "R": 0.01, "L_D": 5, "L_R": 6}})"));
  CHECK(job.lambda.lambda == std::vector<double>{0.2, 1.0});
  CHECK(job.config.floor == 0.7);
  CHECK(job.config.mode == ShapingMode::Literal);
  CHECK(job.rates.relax == 6.0);
  const auto back = intensity_job_from_json(intensity_job_to_json(job));
  CHECK(back.lambda.lambda == job.lambda.lambda);
  CHECK(back.rates.fatigue == job.rates.fatigue);
  CHECK_THROWS_AS(intensity_job_from_json(nlohmann::json::parse(R"({"u": 1.5})")), Error);
}
