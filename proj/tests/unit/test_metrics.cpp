#include "support.hpp"

#include "ff/error.hpp"
#include "ff/metrics.hpp"

#include <catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <iostream>
#include <numeric>

using namespace ff;
using namespace ff::metrics;

namespace {

struct CaptureWarnings {
  std::vector<std::string> messages;
  CaptureWarnings() {
    set_warning_handler([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~CaptureWarnings() {
    set_warning_handler([](std::string_view m) { std::cerr << "warning: " << m << '\n'; });
  }
};

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

double trace_cov(const Matrix& x) {
  const Matrix c = x.rowwise() - x.colwise().mean();
  return (c.transpose() * c).trace() / static_cast<double>(x.rows() - 1);
}

}  // namespace

TEST_CASE("FID closed forms") {
  // N(0, 1) vs N(4, 4): 4^2 + (1 - 2)^2
  CHECK(fid(column({-1, 0, 1}), column({2, 4, 6})).value == Catch::Approx(17.0).epsilon(1e-12));

  const Matrix x = fftest::random_matrix(200, 5, 1);
  const Eigen::RowVectorXd v = fftest::random_matrix(1, 5, 2).row(0);
  CHECK(fid(x, x).value == Catch::Approx(0.0).margin(1e-9));
  CHECK(fid(x, x.rowwise() + v).value == Catch::Approx(v.squaredNorm()).epsilon(1e-9));
  // Scaling by a: (a - 1)^2 (|mean|^2 + tr C)
  const double a = 2.5;
  const double expected = (a - 1) * (a - 1) * (x.colwise().mean().squaredNorm() + trace_cov(x));
  CHECK(fid(x, a * x).value == Catch::Approx(expected).epsilon(1e-9));
}

TEST_CASE("FID properties") {
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const Index d = 1 + static_cast<Index>(uniform_index(rng, 6));
    const Matrix a = fftest::random_matrix(60, d, rng());
    const Matrix b = 1.5 * fftest::random_matrix(80, d, rng()).array() + 0.3;
    const Eigen::RowVectorXd shift = fftest::random_matrix(1, d, rng()).row(0);
    const double ab = fid(a, b).value;
    CHECK(ab >= 0.0);
    CHECK(fid(b, a).value == Catch::Approx(ab).epsilon(1e-8));
    CHECK(fid(a.rowwise() + shift, b.rowwise() + shift).value == Catch::Approx(ab).epsilon(1e-8));
  }
}

TEST_CASE("FID regularizes small sets and rejects bad input") {
  CaptureWarnings w;
  const auto r = fid(fftest::random_matrix(3, 5, 1), fftest::random_matrix(4, 5, 2));
  CHECK(r.regularized);
  CHECK(std::isfinite(r.value));
  CHECK(w.messages.size() == 1);
  CHECK_FALSE(fid(fftest::random_matrix(30, 2, 1), fftest::random_matrix(30, 2, 2)).regularized);
  CHECK_THROWS_AS(fid(fftest::random_matrix(10, 2, 1), fftest::random_matrix(10, 3, 1)), Error);
  Matrix bad = fftest::random_matrix(10, 2, 1);
  bad(3, 1) = std::nan("");
  CHECK_THROWS_AS(fid(bad, bad), Error);
}

TEST_CASE("diversity") {
  Matrix pts(3, 2);
  pts << 0, 0, 3, 4, 0, 4;
  CHECK(diversity_exhaustive(pts) == Catch::Approx((5.0 + 4.0 + 3.0) / 3.0));

  const Matrix f = fftest::random_matrix(30, 4, 5);
  const double exact = diversity_exhaustive(f);
  CHECK(diversity(f, 200000, 1) == Catch::Approx(exact).epsilon(0.01));
  CHECK(diversity(f, 100, 7) == diversity(f, 100, 7));

  std::vector<Index> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  Matrix shuffled(30, 4);
  for (Index i = 0; i < 30; ++i) shuffled.row(i) = f.row(perm[static_cast<std::size_t>(i)]);
  CHECK(diversity_exhaustive(shuffled) == Catch::Approx(exact).epsilon(1e-12));

  CHECK(diversity_exhaustive(Matrix::Ones(5, 3)) == 0.0);
  CHECK_THROWS_AS(diversity(fftest::random_matrix(1, 3, 1), 10, 1), Error);
  CHECK_THROWS_AS(diversity(f, 0, 1), Error);
}

TEST_CASE("MAE and Pearson r") {
  const Matrix a = fftest::random_matrix(50, 3, 1);
  const Matrix b = fftest::random_matrix(50, 3, 2);
  const Matrix c = fftest::random_matrix(50, 3, 3);
  CHECK(mae(a, a) == 0.0);
  CHECK(mae(a, a.array() + 2.0) == Catch::Approx(2.0));
  CHECK(mae(a, b) == Catch::Approx(mae(b, a)));
  CHECK(mae(a, c) <= mae(a, b) + mae(b, c) + 1e-12);
  CHECK_THROWS_AS(mae(a, b.topRows(10)), Error);

  CHECK(pearson_r2(a, a) == Catch::Approx(1.0));
  CHECK(pearson_r2(a, -a) == Catch::Approx(-1.0));
  const double r = pearson_r2(a, b);
  CHECK(pearson_r2(3.0 * a.array() + 1.0, 0.5 * b.array() - 4.0) == Catch::Approx(r).epsilon(1e-12));

  CaptureWarnings w;
  Matrix flat = b;
  flat.col(1).setConstant(2.0);
  const double skipped = pearson_r2(a, flat);
  CHECK(w.messages.size() == 1);
  Matrix a2(50, 2), b2(50, 2);
  a2 << a.col(0), a.col(2);
  b2 << b.col(0), b.col(2);
  CHECK(skipped == Catch::Approx(pearson_r2(a2, b2)));
  CHECK_THROWS_AS(pearson_r2(Matrix::Ones(10, 2), Matrix::Ones(10, 2)), Error);
}

TEST_CASE("motion comparison report") {
  const auto gait = fftest::synthetic_gait(1, 3);
  const auto other = fftest::synthetic_gait(2, 4);
  const auto report = compare_motions(gait.motion, {gait.motion, other.motion}, {"self", "other"});
  CHECK(report.value("self", "MAE") == 0.0);
  CHECK(report.value("self", "R2") == Catch::Approx(1.0));
  CHECK(report.value("other", "MAE").value() > 0.0);
  CHECK_FALSE(report.value("other", "FID"));
  if (gait.motion.frames() != other.motion.frames()) CHECK(report.notes.size() == 1);

  const auto j = report.to_json();
  CHECK(j["rows"][0]["label"] == "self");
  CHECK(j["rows"][0]["values"]["MAE"] == 0.0);
  const auto table = report.to_table();
  CHECK(table.find("MAE") != std::string::npos);
  CHECK(table.find("other") != std::string::npos);

  MetricReport r;
  r.columns = {"A", "B"};
  r.add_row("x", {1.0, std::nullopt});
  CHECK(r.to_json()["rows"][0]["values"]["B"].is_null());
  CHECK(r.to_table().find(" -") != std::string::npos);
  CHECK_THROWS_AS(r.add_row("y", {1.0}), Error);
}

TEST_CASE("ablation report layout") {
  const auto bundle = build_dataset(3, 10, 4);
  const auto corpus = pipeline::build_torque_corpus(bundle, nullptr);
  const auto in = ablation_inputs(corpus, bundle);
  REQUIRE(in.nonfatigued.size() == 3);
  std::vector<Matrix> seqs;
  for (const auto& t : corpus.nonfatigued) seqs.push_back(t.data());
  const auto codec = latent::WindowCodec::fit(seqs);
  latent::CvaeConfig cc;
  cc.n_subjects = 3;
  cc.latent = 4;
  cc.hidden = {16};
  const latent::CvaeModel cvae(cc, codec, 1);
  const latent::FusionAeModel fusion({{16}, 4}, codec, 2);

  AblationOptions opt;
  CaptureWarnings quiet;
  opt.seeds = {3};
  opt.diversity_pairs = 50;
  const auto single = run_ablation(in, cvae, fusion, opt);
  CHECK(single.rows.size() == 7);
  CHECK(single.rows.front().label == "GT");
  CHECK(single.value("GT", "FID").value() == Catch::Approx(0.0).margin(1e-6));
  CHECK(std::find(single.columns.begin(), single.columns.end(), "FID std") == single.columns.end());
  CHECK(single.rows.back().label == "VI CVAE+AE+3CC+Tempo");

  opt.seeds = {3, 4};
  const auto two = run_ablation(in, cvae, fusion, opt);
  CHECK(std::find(two.columns.begin(), two.columns.end(), "FID std") != two.columns.end());
  CHECK(two.value("I CVAE", "FID s3") == single.value("I CVAE", "FID"));
  CHECK(two.to_json()["seeds"].size() == 2);
}
