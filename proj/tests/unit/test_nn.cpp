#include "support.hpp"

#include "ff/error.hpp"
#include "ff/nn/checkpoint.hpp"
#include "ff/nn/layers.hpp"
#include "ff/nn/optim.hpp"
#include "ff/nn/standardizer.hpp"

#include <catch_amalgamated.hpp>

#include <fstream>

using namespace ff;
using namespace ff::nn;

TEST_CASE("every layer passes central-difference gradient checks") {
  for (const auto& r : fftest::layer_gradient_checks(20, 2024)) {
    INFO(r.layer << " worst relative error " << r.worst);
    CHECK(r.configs >= 20);
    CHECK(r.worst < 1e-4);
  }
}

TEST_CASE("attention rows are probability distributions") {
  Rng rng(3);
  MultiHeadAttention mha("a", 12, 4, rng);
  MultiHeadAttention::Cache cache;
  mha.forward(fftest::random_matrix(9, 12, 5, 3.0), &cache);
  REQUIRE(cache.weights.size() == 4);
  for (const auto& w : cache.weights) {
    CHECK(w.minCoeff() >= 0.0);
    CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
  }
  CHECK_THROWS_AS(MultiHeadAttention("bad", 10, 3, rng), Error);
}

TEST_CASE("xavier init with zero bias") {
  Rng rng(1);
  Dense d("d", 30, 20, Activation::Relu, rng);
  const double limit = std::sqrt(6.0 / 50.0);
  CHECK(d.weight().value.cwiseAbs().maxCoeff() <= limit);
  CHECK(d.bias().value.isZero());
}

TEST_CASE("stale caches are rejected after an optimizer step") {
  Rng rng(2);
  Mlp mlp("m", {3, 4, 2}, Activation::Tanh, Activation::Linear, rng);
  Mlp::Cache cache;
  const Matrix y = mlp.forward(fftest::random_matrix(5, 3, 1), &cache);
  const auto params = mlp.parameters();
  zero_grads(params);
  mlp.backward(cache, Matrix::Ones(y.rows(), y.cols()));
  Adam adam;
  adam.step(params);
  try {
    mlp.backward(cache, Matrix::Ones(y.rows(), y.cols()));
    FAIL("stale cache accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StaleCache);
  }
}

TEST_CASE("adam minimizes a quadratic") {
  Parameter p{"p", Matrix::Constant(2, 2, 5.0), Matrix::Zero(2, 2)};
  Adam adam(AdamConfig{0.1});
  for (int i = 0; i < 500; ++i) {
    p.grad = 2.0 * p.value;
    adam.step({&p});
  }
  CHECK(p.value.cwiseAbs().maxCoeff() < 1e-2);
  CHECK(p.version == 500);
  CHECK(adam.steps() == 500);
}

TEST_CASE("plateau scheduler never raises the learning rate") {
  PlateauScheduler sched(PlateauConfig{2, 0.5, 1e-4, 1e-4});
  Rng rng(4);
  double lr = 1e-2;
  for (int e = 0; e < 200; ++e) {
    const double next = sched.step(1.0 + uniform(rng, 0.0, 1.0), lr);
    CHECK(next <= lr);
    CHECK(next >= 1e-4);
    lr = next;
  }
  CHECK(lr == 1e-4);
}

TEST_CASE("kl warmup is linear, monotone and capped") {
  const KlWarmup w{0.5, 20};
  double prev = -1;
  for (int e = 0; e <= 60; ++e) {
    const double b = w.beta(e);
    CHECK(b == 0.5 * std::min(1.0, e / 20.0));
    CHECK(b >= prev);
    CHECK(b <= 0.5);
    prev = b;
  }
}

TEST_CASE("kl of the standard normal is zero") {
  CHECK(kl_gaussian(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)) == 0.0);
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(3, 1.0);
  CHECK(kl_gaussian(mu, Eigen::VectorXd::Zero(3)) == Catch::Approx(1.5));
  CHECK(kl_to_standard_normal(Matrix::Zero(5, 4), Matrix::Zero(5, 4)).value == 0.0);
}

TEST_CASE("checkpoint round trip is bit exact") {
  fftest::TempDir dir("nn_ckpt");
  Rng rng(9);
  TransformerNet net(TransformerConfig{3, 2, 8, 2, 12, 2}, rng);
  Checkpoint ck;
  ck.manifest["kind"] = "test";
  ck.put_params(net.parameters(), "net.");
  ck.put("extra", fftest::random_matrix(3, 5, 1));
  save_checkpoint(ck, dir / "model");
  CHECK(std::filesystem::exists(dir / "model.json"));
  CHECK(std::filesystem::file_size(dir / "model.bin") % 8 == 0);

  const auto back = load_checkpoint(dir / "model");
  CHECK(back.manifest["kind"] == "test");
  CHECK(back.get("extra") == ck.get("extra"));
  Rng other(10);
  TransformerNet copy(TransformerConfig{3, 2, 8, 2, 12, 2}, other);
  back.get_params(copy.parameters(), "net.");
  const Matrix x = fftest::random_matrix(6, 3, 2);
  CHECK(copy.forward(x, nullptr) == net.forward(x, nullptr));
  CHECK_THROWS_AS(back.get("missing"), Error);
}

TEST_CASE("checkpoint blob is little-endian float64") {
  fftest::TempDir dir("nn_blob");
  Checkpoint ck;
  Matrix m(1, 2);
  m << 1.0, -2.5;
  ck.put("w", m);
  save_checkpoint(ck, dir / "c");
  std::ifstream in(dir / "c.bin", std::ios::binary);
  unsigned char bytes[16];
  in.read(reinterpret_cast<char*>(bytes), 16);
  CHECK(bytes[7] == 0x3f);
  CHECK(bytes[6] == 0xf0);
  CHECK(bytes[15] == 0xc0);
  CHECK(bytes[14] == 0x04);
}

TEST_CASE("truncated blob is rejected") {
  fftest::TempDir dir("nn_trunc");
  Checkpoint ck;
  ck.put("w", Matrix::Ones(4, 4));
  save_checkpoint(ck, dir / "c");
  std::filesystem::resize_file(dir / "c.bin", 40);
  CHECK_THROWS_AS(load_checkpoint(dir / "c"), Error);
}

TEST_CASE("standardizer inverts") {
  const Matrix a = fftest::random_matrix(50, 3, 1, 4.0).array() + 7.0;
  const auto s = Standardizer::fit({a});
  const Matrix z = s.apply(a);
  CHECK(z.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.invert(z) - a).cwiseAbs().maxCoeff() < 1e-12);
  const Matrix flat = Matrix::Constant(10, 2, 3.0);
  CHECK(Standardizer::fit({flat}).apply(flat).allFinite());
}

TEST_CASE("forward passes are deterministic for a seed") {
  Rng a(77), b(77);
  TransformerNet n1(TransformerConfig{}, a), n2(TransformerConfig{}, b);
  const Matrix x = fftest::random_matrix(16, 8, 3);
  CHECK(n1.forward(x, nullptr) == n2.forward(x, nullptr));
}
