#include "support.hpp"

#include <array>
#include <cstdio>
#include <sys/wait.h>

namespace fftest {

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double scale) {
  ff::Rng rng(seed);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * ff::standard_normal(rng);
  return m;
}

TempDir::TempDir(const std::string& tag) {
  static int counter = 0;
  ff::Rng rng(std::random_device{}());
  path_ = std::filesystem::temp_directory_path() /
          ("fftest_" + tag + "_" + std::to_string(rng() % 1000000) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

ff::GeneratedGait synthetic_gait(std::uint64_t seed, Index strides, ff::FatigueState state, int subject) {
  const auto profile = ff::generate_subject_profile(seed, ff::SubjectId{subject}, ff::GeneratorConfig::defaults());
  return ff::generate_gait(profile, state, strides, ff::derive_seed(seed, 17));
}

namespace {

// Tensors whose gradients are both below 1e-4 in norm are compared on an
// absolute scale; central differences carry ~1e-10 of rounding noise.
double relative(const Matrix& a, const Matrix& n) {
  return (a - n).norm() / std::max(a.norm() + n.norm(), 1e-4);
}

}  // namespace

GradCheck check_gradients(const ff::nn::ParamList& params, Matrix& x, const std::function<double(const Matrix&)>& loss,
                          const std::function<Matrix(const Matrix&)>& backward, double h) {
  ff::nn::zero_grads(params);
  const Matrix dx = backward(x);
  std::vector<Matrix> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  GradCheck out;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& v = params[k]->value;
    Matrix numeric(v.rows(), v.cols());
    for (Index i = 0; i < v.rows(); ++i)
      for (Index j = 0; j < v.cols(); ++j) {
        const double keep = v(i, j);
        v(i, j) = keep + h;
        const double up = loss(x);
        v(i, j) = keep - h;
        const double down = loss(x);
        v(i, j) = keep;
        numeric(i, j) = (up - down) / (2.0 * h);
      }
    out.max_param_error = std::max(out.max_param_error, relative(analytic[k], numeric));
  }
  Matrix numeric(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      const double keep = x(i, j);
      x(i, j) = keep + h;
      const double up = loss(x);
      x(i, j) = keep - h;
      const double down = loss(x);
      x(i, j) = keep;
      numeric(i, j) = (up - down) / (2.0 * h);
    }
  out.input_error = relative(dx, numeric);
  return out;
}

CommandResult run_command(const std::string& command) {
  CommandResult r;
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return {-1, "popen failed"};
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace fftest

namespace fftest {

namespace {

using ff::nn::ParamList;

void randomize(const ParamList& params, ff::Rng& rng, double scale) {
  for (auto* p : params)
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += scale * ff::standard_normal(rng);
}

Index pick(ff::Rng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(ff::uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

/// Loss = sum(forward(x) .* R) so d(loss)/d(output) = R.
template <typename Layer>
double check_layer(Layer& layer, const ParamList& params, Index rows, Index in, Index out_cols, ff::Rng& rng) {
  Matrix x = random_matrix(rows, in, rng());
  const Matrix r = random_matrix(rows, out_cols, rng());
  const auto loss = [&](const Matrix& v) { return (layer.forward(v, nullptr).array() * r.array()).sum(); };
  const auto backward = [&](const Matrix& v) {
    typename Layer::Cache cache;
    layer.forward(v, &cache);
    return layer.backward(cache, r);
  };
  return check_gradients(params, x, loss, backward).worst();
}

}  // namespace

std::vector<LayerGradReport> layer_gradient_checks(int configs, std::uint64_t seed) {
  using namespace ff::nn;
  ff::Rng rng(seed);
  std::vector<LayerGradReport> out{{"Dense", configs},       {"LayerNorm", configs}, {"MultiHeadAttention", configs},
                                   {"EncoderBlock", configs}, {"Mlp", configs},       {"TransformerNet", configs},
                                   {"mse_loss", configs},     {"kl_to_standard_normal", configs}};
  const Activation acts[] = {Activation::Linear, Activation::Relu, Activation::Tanh};
  for (int c = 0; c < configs; ++c) {
    const Index rows = pick(rng, 1, 6);
    {
      const Index in = pick(rng, 1, 7), o = pick(rng, 1, 7);
      Dense d("d", in, o, acts[c % 3], rng);
      ParamList p;
      d.collect(p);
      randomize(p, rng, 0.1);
      out[0].worst = std::max(out[0].worst, check_layer(d, p, rows, in, o, rng));
    }
    {
      const Index w = pick(rng, 2, 8);
      LayerNorm ln("ln", w);
      ParamList p;
      ln.collect(p);
      randomize(p, rng, 0.5);
      out[1].worst = std::max(out[1].worst, check_layer(ln, p, rows, w, w, rng));
    }
    {
      const Index heads = pick(rng, 1, 3), w = heads * pick(rng, 1, 3);
      MultiHeadAttention mha("a", w, heads, rng);
      ParamList p;
      mha.collect(p);
      randomize(p, rng, 0.1);
      out[2].worst = std::max(out[2].worst, check_layer(mha, p, pick(rng, 2, 6), w, w, rng));
    }
    {
      const Index heads = pick(rng, 1, 2), w = heads * pick(rng, 2, 3);
      EncoderBlock blk("b", w, heads, pick(rng, 2, 8), rng);
      ParamList p;
      blk.collect(p);
      randomize(p, rng, 0.1);
      out[3].worst = std::max(out[3].worst, check_layer(blk, p, pick(rng, 2, 5), w, w, rng));
    }
    {
      std::vector<Index> widths{pick(rng, 1, 6)};
      for (Index l = pick(rng, 1, 3); l > 0; --l) widths.push_back(pick(rng, 1, 6));
      Mlp mlp("m", widths, acts[c % 3], acts[(c + 1) % 3], rng);
      // Zero biases put a ReLU kink exactly at x whenever a row's hidden units are all dead.
      randomize(mlp.parameters(), rng, 0.1);
      out[4].worst = std::max(out[4].worst, check_layer(mlp, mlp.parameters(), rows, widths.front(), widths.back(), rng));
    }
    {
      TransformerConfig tc;
      tc.in_channels = pick(rng, 1, 3);
      tc.out_channels = pick(rng, 1, 3);
      tc.heads = pick(rng, 1, 2);
      tc.width = tc.heads * pick(rng, 2, 3);
      tc.ffn_width = pick(rng, 2, 6);
      tc.blocks = pick(rng, 1, 2);
      TransformerNet net(tc, rng);
      randomize(net.parameters(), rng, 0.05);
      out[5].worst = std::max(out[5].worst,
                              check_layer(net, net.parameters(), pick(rng, 2, 5), tc.in_channels, tc.out_channels, rng));
    }
    {
      const Index cols = pick(rng, 1, 5);
      Matrix pred = random_matrix(rows, cols, rng());
      const Matrix target = random_matrix(rows, cols, rng());
      const auto g = check_gradients(
          {}, pred, [&](const Matrix& v) { return mse_loss(v, target).value; },
          [&](const Matrix& v) { return mse_loss(v, target).grad; });
      out[6].worst = std::max(out[6].worst, g.worst());
    }
    {
      const Index d = pick(rng, 1, 5);
      Matrix both = random_matrix(rows, 2 * d, rng(), 0.7);
      const auto split = [d](const Matrix& v) { return std::pair<Matrix, Matrix>{v.leftCols(d), v.rightCols(d)}; };
      const auto g = check_gradients(
          {}, both,
          [&](const Matrix& v) {
            const auto [mu, ls] = split(v);
            return kl_to_standard_normal(mu, ls).value;
          },
          [&](const Matrix& v) {
            const auto [mu, ls] = split(v);
            const auto k = kl_to_standard_normal(mu, ls);
            Matrix grad(v.rows(), v.cols());
            grad << k.d_mu, k.d_log_sigma;
            return grad;
          });
      out[7].worst = std::max(out[7].worst, g.worst());
    }
  }
  return out;
}

}  // namespace fftest
