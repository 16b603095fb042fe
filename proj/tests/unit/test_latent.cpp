#include "support.hpp"

#include "ff/error.hpp"
#include "ff/latent.hpp"
#include "ff/pipeline.hpp"

#include <catch_amalgamated.hpp>

using namespace ff;
using namespace ff::latent;

namespace {

struct Fixture {
  DatasetBundle bundle = build_dataset(3, 10, 21);
  pipeline::TorqueCorpus corpus = pipeline::build_torque_corpus(bundle, nullptr);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

CvaeModel small_cvae(CvaeTrainReport* report = nullptr, int epochs = 6) {
  const auto& f = fixture();
  CvaeConfig cfg;
  cfg.n_subjects = 3;
  cfg.hidden = {32, 16};
  cfg.latent = 4;
  CvaeTrainConfig tc;
  tc.epochs = epochs;
  tc.batch = 8;
  return cvae_train(f.corpus.train, f.corpus.validation, cfg, tc, report);
}

FusionAeModel small_ae(FusionAeTrainReport* report = nullptr) {
  const auto fc = pipeline::build_fusion_corpus(fixture().corpus, nullptr, 1);
  FusionAeConfig cfg;
  cfg.hidden = {64, 32};
  cfg.latent = 8;
  FusionAeTrainConfig tc;
  tc.epochs = 15;
  tc.batch = 8;
  return fusionae_train(fc.train, fc.validation, cfg, tc, nullptr, report);
}

TorqueSequence as_torque(const Matrix& m) {
  return TorqueSequence(fixture().corpus.nonfatigued[0].channels(), m, 128.0);
}

}  // namespace

TEST_CASE("fatigue profile uses a signed denominator floor") {
  const auto ch = ChannelSpec::joints_only({"a", "b", "c"});
  Matrix nf(1, 3), f(1, 3);
  nf << 2.0, 1e-6, -1e-6;
  f << 3.0, 1.0, 1.0;
  const auto p = compute_fatigue_profile(TorqueSequence(ch, nf, 128), TorqueSequence(ch, f, 128), SubjectId{2});
  CHECK(p.ratio(0, 0) == 1.5);
  CHECK(p.ratio(0, 1) == Catch::Approx(1.0 / kProfileEpsilon));
  CHECK(p.ratio(0, 2) == Catch::Approx(-1.0 / kProfileEpsilon));
  CHECK(p.subject == SubjectId{2});
}

TEST_CASE("reparameterization") {
  const Eigen::VectorXd mu = Eigen::VectorXd::LinSpaced(5, -1, 1);
  CHECK(reparameterize(mu, Eigen::VectorXd::Constant(5, -40.0), 3) == mu);
  CHECK(reparameterize(mu, Eigen::VectorXd::Zero(5), 3) == reparameterize(mu, Eigen::VectorXd::Zero(5), 3));
  CHECK(reparameterize(mu, Eigen::VectorXd::Zero(5), 3) != reparameterize(mu, Eigen::VectorXd::Zero(5), 4));
}

TEST_CASE("latent fusion is exact and linear in the weights") {
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    std::vector<Eigen::VectorXd> z;
    for (int n = 0; n < 3; ++n) z.push_back(fftest::random_matrix(1, 16, rng()).row(0).transpose());
    CHECK(fuse_latents({z[0], z[1]}, {1.0, 0.0}) == z[0]);
    const double a = uniform(rng, 0, 1);
    const double w1 = uniform(rng, 0, 1), w2 = uniform(rng, 0, 1 - w1);
    const std::vector<double> W{w1, w2, 1 - w1 - w2}, V{1 - w1, 0.0, w1};
    std::vector<double> mix(3);
    for (int i = 0; i < 3; ++i) mix[i] = a * W[i] + (1 - a) * V[i];
    const Eigen::VectorXd lhs = fuse_latents(z, mix);
    const Eigen::VectorXd rhs = a * fuse_latents(z, W) + (1 - a) * fuse_latents(z, V);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(fuse_latents({Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)}, {0.5, 0.6}), Error);
  CHECK_THROWS_AS(fuse_latents({Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)}, {0.5, 0.5}), Error);
}

TEST_CASE("window codec shapes") {
  const auto& c = fixture().corpus;
  const auto codec = WindowCodec::fit({c.nonfatigued[0].data()});
  const Matrix w = codec.to_windows(c.nonfatigued[0].data());
  CHECK(w.rows() == c.nonfatigued[0].frames() / 300);
  CHECK(w.cols() == 60 * 8);
  CHECK(codec.from_windows(w).rows() == c.nonfatigued[0].frames());
  CHECK_THROWS_AS(codec.to_windows(Matrix::Zero(299, 8)), Error);
  Matrix flat(600, 8);
  for (Index j = 0; j < 8; ++j) flat.col(j).setConstant(static_cast<double>(j) - 3.0);
  CHECK((codec.from_windows(codec.to_windows(flat)) - flat).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("torque corpus pairs are stance aligned") {
  const auto& c = fixture().corpus;
  REQUIRE(c.train.size() == 3);
  REQUIRE(c.validation.size() == 3);
  for (const auto& p : c.train) {
    CHECK(p.nonfatigued.rows() == p.fatigued.rows());
    CHECK(p.nonfatigued.rows() % 300 == 0);
  }
}

TEST_CASE("cvae trains, validates and round trips") {
  CvaeTrainReport rep;
  const auto model = small_cvae(&rep);
  CHECK(rep.final_recon < rep.initial_recon);
  for (double kl : rep.val_kl) {
    CHECK(std::isfinite(kl));
    CHECK(kl >= 0.0);
  }
  for (std::size_t e = 0; e < rep.beta.size(); ++e) CHECK(rep.beta[e] == nn::KlWarmup{}.beta(static_cast<int>(e)));

  const auto& nf = fixture().corpus.nonfatigued[1];
  const Index S = nf.frames() / 300;
  const auto a = cvae_generate(model, nf, SubjectId{2}, 7);
  CHECK(a.frames() == nf.frames());
  CHECK(a == cvae_generate(model, nf, SubjectId{2}, 7));
  CHECK(a.data().allFinite());
  CHECK_THROWS_AS(cvae_generate(model, nf, SubjectId{3}, 7), Error);
  CHECK_THROWS_AS(cvae_generate(model, nf, SubjectId{0}, Matrix::Zero(S + 1, 4)), Error);

  fftest::TempDir dir("cvae_ckpt");
  model.save(dir / "cvae");
  const auto back = CvaeModel::load(dir / "cvae");
  CHECK(cvae_generate(back, nf, SubjectId{2}, 7) == a);
  try {
    back.check_label(SubjectId{-1});
    FAIL("negative label accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownLabel);
  }
}

TEST_CASE("fusion autoencoder algebra") {
  FusionAeTrainReport rep;
  const auto ae = small_ae(&rep);
  CHECK(ae.validation_mse() > 0.0);
  CHECK(ae.latent_size() == 8 + 8);

  const auto& c = fixture().corpus;
  const auto& a = c.validation[0].nonfatigued;
  const auto& b = c.validation[1].fatigued;
  const Index rows = std::min(a.rows(), b.rows());
  const auto ta = as_torque(a.topRows(rows)), tb = as_torque(b.topRows(rows));

  const auto keep_a = fusion_pipeline(ae, ta, tb, {1.0, 0.0});
  CHECK(keep_a.data() == ae.decode_sequence(ae.encode_sequence(ta.data())));
  const double mse = (keep_a.data() - ta.data()).squaredNorm() / static_cast<double>(ta.data().size());
  CHECK(mse <= 1.5 * ae.validation_mse());

  // Channel means ride through the latent linearly, so a midpoint lands between the inputs.
  const auto mid = fusion_pipeline(ae, ta, tb, {0.5, 0.5});
  for (Index j = 0; j < 8; ++j) {
    const double ma = ta.data().col(j).mean(), mb = tb.data().col(j).mean(), mm = mid.data().col(j).mean();
    const double slack = 0.05 * std::abs(ma - mb) + 1e-9;
    CHECK(mm >= std::min(ma, mb) - slack);
    CHECK(mm <= std::max(ma, mb) + slack);
  }

  const auto zero_ramp = dynamic_fusion(ae, ta, tb, std::vector<double>(static_cast<std::size_t>(rows), 0.0));
  CHECK((zero_ramp.data() - keep_a.data()).cwiseAbs().maxCoeff() < 1e-9);
  auto bad = linear_ramp(rows);
  std::swap(bad[3], bad[40]);
  CHECK_THROWS_AS(dynamic_fusion(ae, ta, tb, bad), Error);
  CHECK_NOTHROW(dynamic_fusion(ae, ta, tb, bad, false));
  CHECK_THROWS_AS(fusion_pipeline(ae, ta, as_torque(b.topRows(rows - 300)), {0.5, 0.5}), Error);

  fftest::TempDir dir("ae_ckpt");
  ae.save(dir / "ae");
  const auto back = FusionAeModel::load(dir / "ae");
  CHECK(back.validation_mse() == ae.validation_mse());
  CHECK(fusion_pipeline(back, ta, tb, {0.3, 0.7}) == fusion_pipeline(ae, ta, tb, {0.3, 0.7}));
}

TEST_CASE("linear ramp") {
  const auto r = linear_ramp(5);
  CHECK(r == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(linear_ramp(1) == std::vector<double>{1.0});
}
