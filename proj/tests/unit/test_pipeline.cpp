#include "support.hpp"

#include "ff/error.hpp"
#include "ff/io.hpp"
#include "ff/pipeline.hpp"

#include <catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include <numeric>

using namespace ff;
using namespace ff::pipeline;
using nlohmann::json;

namespace {

Matrix polynomial_columns(Index rows, Index degree, std::uint64_t seed) {
  const Matrix coef = fftest::random_matrix(degree + 1, 3, seed);
  Matrix out = Matrix::Zero(rows, 3);
  for (Index t = 0; t < rows; ++t) {
    const double x = -1.0 + 2.0 * static_cast<double>(t) / static_cast<double>(rows - 1);
    double p = 1.0;
    for (Index k = 0; k <= degree; ++k, p *= x) out.row(t) += p * coef.row(k);
  }
  return out;
}

struct Fixture {
  GeneratedGait gait = fftest::synthetic_gait(5, 4);
  Models models;

  Fixture() {
    const auto joints = gait.motion.channels().joint_names();
    const auto body = dynamics::BodyModel::standard(joints);
    const auto t = dynamics::normalized_torques(gait.motion, gait.segmentation, body);
    const auto codec = latent::WindowCodec::fit({t.data()});
    dynamics::SurrogateConfig sc{dynamics::Direction::ID, 1, 2, 8, 16, 32, 16};
    models.id = dynamics::Surrogate(sc, joints, 1);
    sc.direction = dynamics::Direction::FD;
    models.fd = dynamics::Surrogate(sc, joints, 2);
    latent::CvaeConfig cc;
    cc.n_subjects = 3;
    cc.latent = 4;
    cc.embed = 2;
    cc.hidden = {16};
    models.cvae = latent::CvaeModel(cc, codec, 3);
    models.fusion = latent::FusionAeModel({{16}, 4}, codec, 4);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

ControlParams control(int label = 1) {
  ControlParams c;
  c.label = SubjectId{label};
  c.fusion_weights = {0.3, 0.7};
  return c;
}

}  // namespace

TEST_CASE("Savitzky-Golay reproduces polynomials up to its order") {
  for (Index order : {0, 1, 2, 3, 4}) {
    for (Index window : {order + 1, order + 3, Index{9}, Index{15}}) {
      if (window % 2 == 0) ++window;
      for (Index degree = 0; degree <= order; ++degree) {
        const Matrix x = polynomial_columns(40, degree, static_cast<std::uint64_t>(order * 100 + window * 10 + degree));
        const Matrix y = savitzky_golay(x, window, order);
        INFO("order " << order << " window " << window << " degree " << degree);
        CHECK((y - x).cwiseAbs().maxCoeff() < 1e-9);
      }
    }
  }
}

TEST_CASE("Savitzky-Golay window 1 is the identity and smoothing reduces noise") {
  const Matrix x = fftest::random_matrix(50, 3, 9);
  CHECK(savitzky_golay(x, 1, 0) == x);
  const Matrix clean = polynomial_columns(200, 2, 3);
  const Matrix noisy = clean + 0.05 * fftest::random_matrix(200, 3, 4);
  const Matrix smooth = savitzky_golay(noisy, 15, 2);
  CHECK((smooth - clean).norm() < 0.6 * (noisy - clean).norm());
}

TEST_CASE("Savitzky-Golay rejects invalid settings") {
  const Matrix x = fftest::random_matrix(20, 2, 1);
  CHECK_THROWS_AS(savitzky_golay(x, 4, 2), Error);
  CHECK_THROWS_AS(savitzky_golay(x, 5, 5), Error);
  CHECK_THROWS_AS(savitzky_golay(x, 25, 2), Error);
  PostProcessSettings p;
  p.contact_fraction = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("foot lock keeps the planted foot within tolerance") {
  auto gait = fftest::synthetic_gait(11, 6);
  Matrix data = gait.motion.data();
  const auto root = gait.motion.channels().root_indices();
  Rng rng(2);
  for (Index t = 0; t < data.rows(); ++t) data(t, root[0]) += 0.05 * std::sin(0.3 * static_cast<double>(t)) + uniform(rng, -0.01, 0.01);
  const MotionSequence noisy(gait.motion.channels(), data, gait.motion.frame_rate());
  PostProcessSettings p;
  p.foot_lock = false;
  const auto smoothed = post_process(noisy, p, &gait.segmentation);
  p.foot_lock = true;
  const auto locked = post_process(noisy, p, &gait.segmentation);
  const double before = max_foot_drift(smoothed, gait.segmentation, p.contact_fraction);
  const double after = max_foot_drift(locked, gait.segmentation, p.contact_fraction);
  CHECK(before > p.foot_lock_tolerance);
  CHECK(after <= p.foot_lock_tolerance);
  for (Index j : locked.channels().joint_indices()) CHECK(locked.data().col(j) == smoothed.data().col(j));
}

TEST_CASE("tempo helpers") {
  CHECK(fit_tempo({40, 50}, 5).durations == std::vector<Index>{40, 50, 40, 50, 40});
  CHECK(fit_tempo({40, 50, 60}, 2).durations == std::vector<Index>{40, 50});
  CHECK_THROWS_AS(fit_tempo({}, 2), Error);

  const auto seg = StanceSegmentation::from_durations({64, 128});
  const auto dt = normalized_step_sizes(seg, 128.0, 300);
  REQUIRE(dt.size() == 600);
  CHECK(std::accumulate(dt.begin(), dt.end(), 0.0) == Catch::Approx(192.0 / 128.0));

  Matrix m(6, 1);
  m << 1, 2, 3, 4, 5, 6;
  const Matrix cycled = match_stances(m, 2, 5);
  CHECK(cycled.rows() == 10);
  CHECK(cycled(6, 0) == 1.0);
  CHECK(cycled(9, 0) == 4.0);
  CHECK(match_stances(m, 2, 1) == m.topRows(2));
  CHECK_THROWS_AS(match_stances(m, 4, 2), Error);
}

TEST_CASE("static pipeline produces a traced, reproducible motion") {
  const auto& f = fixture();
  PipelineConfig cfg;
  PipelineTrace trace;
  const auto out = run_fatiguefusion(f.gait.motion, f.gait.segmentation, control(), f.models, cfg, &trace);
  CHECK(out.channels() == f.gait.motion.channels());
  CHECK(out.frames() == f.gait.motion.frames());
  CHECK(out.data().allFinite());
  for (const char* s : {"Q_dot_nf", "T_nf", "T_hat_f", "T_hat_prime_f", "Q_hat_prime_f"}) CHECK(trace.has(s));
  CHECK_FALSE(trace.has("T_hat_f_plus"));
  const Index S = f.gait.segmentation.stance_count();
  CHECK(trace.get("T_nf").data.rows() == S * cfg.n_norm);
  CHECK(trace.get("T_nf").data.cols() == static_cast<Index>(f.gait.motion.channels().joint_names().size()));

  const auto again = run_fatiguefusion(f.gait.motion, f.gait.segmentation, control(), f.models, cfg);
  CHECK(again.data() == out.data());
  cfg.seed = 2;
  CHECK(run_fatiguefusion(f.gait.motion, f.gait.segmentation, control(), f.models, cfg).data() != out.data());

  fftest::TempDir dir("pipeline");
  trace.dump(dir / "trace");
  for (const auto& e : trace.entries) CHECK(std::filesystem::exists(dir / "trace" / (e.symbol + ".csv")));
  CHECK(load_torque_csv(dir / "trace" / "T_hat_f.csv").data().isApprox(trace.get("T_hat_f").data, 1e-9));
}

TEST_CASE("intensity at u = 1 is neutral and a tempo profile sets the length") {
  const auto& f = fixture();
  PipelineConfig cfg;
  auto c = control();
  const auto off = run_fatiguefusion(f.gait.motion, f.gait.segmentation, c, f.models, cfg);
  c.intensity_enabled = true;
  PipelineTrace trace;
  const auto on = run_fatiguefusion(f.gait.motion, f.gait.segmentation, c, f.models, cfg, &trace);
  CHECK(on.data() == off.data());
  CHECK(trace.get("T_hat_f_plus").data == trace.get("T_hat_f").data);

  c.intensity_enabled = false;
  c.tempo = {70, 90};
  const auto retimed = run_fatiguefusion(f.gait.motion, f.gait.segmentation, c, f.models, cfg);
  const Index S = f.gait.segmentation.stance_count();
  const auto k = fit_tempo(c.tempo, S).durations;
  CHECK(retimed.frames() == std::accumulate(k.begin(), k.end(), Index{0}));
}

TEST_CASE("pipeline errors carry the stage name") {
  const auto& f = fixture();
  PipelineConfig cfg;
  auto c = control();
  c.fusion_weights = {0.5, 0.6};
  try {
    run_fatiguefusion(f.gait.motion, f.gait.segmentation, c, f.models, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Weights);
    CHECK(std::string(e.what()).find("stage ") == 0);
  }
  c = control(7);
  try {
    run_fatiguefusion(f.gait.motion, f.gait.segmentation, c, f.models, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownLabel);
    CHECK(std::string(e.what()).find("stage models") == 0);
  }
}

TEST_CASE("progressive pipeline starts at the partner and validates ramps") {
  const auto& f = fixture();
  PipelineConfig cfg;
  PipelineTrace trace;
  const auto out = run_progressive(f.gait.motion, f.gait.segmentation, control(), f.models, cfg, {}, {}, &trace);
  CHECK(out.frames() == f.gait.motion.frames());
  CHECK(out.data().allFinite());

  const Index T = trace.get("T_nf").data.rows();
  const auto zero = run_progressive(f.gait.motion, f.gait.segmentation, control(), f.models, cfg,
                                    std::vector<double>(static_cast<std::size_t>(T), 0.0));
  auto c = control();
  c.fusion_weights = {1.0, 0.0};
  CHECK(zero.data().isApprox(run_fatiguefusion(f.gait.motion, f.gait.segmentation, c, f.models, cfg).data(), 1e-9));

  std::vector<double> bad(static_cast<std::size_t>(T), 0.0);
  bad[10] = 0.5;
  CHECK_THROWS_AS(run_progressive(f.gait.motion, f.gait.segmentation, control(), f.models, cfg, bad), Error);
  c = control();
  c.intensity_enabled = true;
  CHECK_THROWS_AS(run_progressive(f.gait.motion, f.gait.segmentation, c, f.models, cfg, {}, {0.5}), Error);
}

TEST_CASE("pipeline job parsing") {
  const json j = {
      {"mode", "progressive"},
      {"input", {{"motion", "in.csv"}, {"threshold", 20.0}}},
      {"partner", {{"dataset", "/data"}, {"subject", 2}}},
      {"control", {{"label", 3}, {"W", {0.25, 0.75}}, {"K", {50, 60}}, {"u", 0.7}, {"intensity", true}}},
      {"checkpoints", {{"id", "ck/id"}, {"fd", "ck/fd"}, {"cvae", "ck/cvae"}, {"fusionae", "/abs/fusionae"}}},
      {"postprocess", {{"sg_window", 7}, {"foot_lock", false}}},
      {"seed", 9},
      {"ramp", {0.0, 1.0}},
      {"output", {{"motion", "out.csv"}, {"trace", "trace"}}}};
  const auto job = pipeline_job_from_json(j, "/base");
  CHECK(job.mode == PipelineJob::Mode::Progressive);
  CHECK(job.input.motion == "/base/in.csv");
  CHECK(job.input.segmentation.threshold == 20.0);
  REQUIRE(job.partner);
  CHECK(job.partner->dataset == "/data");
  CHECK(job.partner->subject == 2);
  CHECK(job.control.label == SubjectId{3});
  CHECK(job.control.fusion_weights == std::vector<double>{0.25, 0.75});
  CHECK(job.control.tempo == std::vector<Index>{50, 60});
  CHECK(job.control.intensity_floor == 0.7);
  CHECK(job.control.intensity_enabled);
  CHECK(job.checkpoints.id == "/base/ck/id");
  CHECK(job.checkpoints.fusion == "/abs/fusionae");
  CHECK(job.config.post.sg_window == 7);
  CHECK_FALSE(job.config.post.foot_lock);
  CHECK(job.config.seed == 9);
  CHECK(job.ramp.size() == 2);
  CHECK(job.trace_dir == "/base/trace");

  json k = j;
  k["control"]["K"] = {{"motion", "k.csv"}, {"boundaries", {0, 60, 130}}};
  const auto from_motion = pipeline_job_from_json(k, "/base");
  REQUIRE(from_motion.tempo_from);
  CHECK(from_motion.tempo_from->boundaries == std::vector<Index>{0, 60, 130});

  json bad = j;
  bad.erase("checkpoints");
  CHECK_THROWS_MATCHES(pipeline_job_from_json(bad, "/base"), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::Parse; }));
  bad = j;
  bad["input"] = {{"motion", "in.csv"}};
  CHECK_THROWS_AS(pipeline_job_from_json(bad, "/base"), Error);
  bad = j;
  bad["control"]["W"] = {0.5, 0.6};
  CHECK_THROWS_MATCHES(pipeline_job_from_json(bad, "/base"), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::Weights; }));
}
