#include "ff/nn/layers.hpp"

#include "ff/error.hpp"

#include <cmath>

namespace ff::nn {

void zero_grads(const ParamList& params) {
  for (auto* p : params) p->zero_grad();
}

std::uint64_t params_version(const ParamList& params) {
  std::uint64_t v = 0;
  for (auto* p : params) v += p->version;
  return v;
}

Index parameter_count(const ParamList& params) {
  Index n = 0;
  for (auto* p : params) n += p->value.size();
  return n;
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "linear";
}

Activation activation_from_name(const std::string& name) {
  if (name == "linear") return Activation::Linear;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  fail(ErrorCode::Parse, "unknown activation '" + name + "'");
}

namespace {

Parameter make_param(std::string name, Matrix value) {
  Parameter p;
  p.name = std::move(name);
  p.value = std::move(value);
  p.zero_grad();
  return p;
}

Matrix xavier(Index out, Index in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix w(out, in);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -limit, limit);
  return w;
}

void check_cols(const Matrix& x, Index expected, const char* what) {
  require(x.cols() == expected, ErrorCode::ShapeMismatch,
          std::string(what) + ": expected " + std::to_string(expected) + " input columns, got " +
              std::to_string(x.cols()));
}

}  // namespace

Dense::Dense(std::string name, Index in, Index out, Activation act, Rng& rng) : act_(act) {
  require(in > 0 && out > 0, ErrorCode::InvalidArgument, "dense layer widths must be positive");
  weight_ = make_param(name + ".weight", xavier(out, in, rng));
  bias_ = make_param(name + ".bias", Matrix::Zero(1, out));
}

Matrix Dense::forward(const Matrix& x, Cache* cache) const {
  check_cols(x, in(), "dense");
  Matrix y(x.rows(), out());
  y.noalias() = x * weight_.value.transpose();
  y.rowwise() += bias_.value.row(0);
  switch (act_) {
    case Activation::Linear: break;
    case Activation::Relu: y = y.cwiseMax(0.0); break;
    case Activation::Tanh: y = y.array().tanh().matrix(); break;
  }
  if (cache) {
    cache->input = x;
    cache->output = y;
  }
  return y;
}

Matrix Dense::backward(const Cache& cache, const Matrix& dy) {
  require(dy.rows() == cache.output.rows() && dy.cols() == cache.output.cols(), ErrorCode::ShapeMismatch,
          "dense backward: gradient shape does not match output");
  Matrix dz = dy;
  switch (act_) {
    case Activation::Linear: break;
    case Activation::Relu: dz = (cache.output.array() > 0.0).select(dy, 0.0); break;
    case Activation::Tanh: dz = (dy.array() * (1.0 - cache.output.array().square())).matrix(); break;
  }
  weight_.grad.noalias() += dz.transpose() * cache.input;
  bias_.grad.row(0) += dz.colwise().sum();
  Matrix dx(dz.rows(), in());
  dx.noalias() = dz * weight_.value;
  return dx;
}

void Dense::collect(ParamList& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

LayerNorm::LayerNorm(std::string name, Index width) {
  require(width > 0, ErrorCode::InvalidArgument, "layer norm width must be positive");
  gamma_ = make_param(name + ".gamma", Matrix::Ones(1, width));
  beta_ = make_param(name + ".beta", Matrix::Zero(1, width));
}

Matrix LayerNorm::forward(const Matrix& x, Cache* cache) const {
  const Index d = gamma_.value.cols();
  check_cols(x, d, "layer norm");
  Matrix xhat(x.rows(), d);
  Eigen::VectorXd inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps_);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Matrix y = (xhat.array().rowwise() * gamma_.value.row(0).array()).matrix();
  y.rowwise() += beta_.value.row(0);
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix LayerNorm::backward(const Cache& cache, const Matrix& dy) {
  const Index d = gamma_.value.cols();
  const auto& xhat = cache.normalized;
  gamma_.grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  beta_.grad.row(0) += dy.colwise().sum();
  Matrix dxhat = (dy.array().rowwise() * gamma_.value.row(0).array()).matrix();
  Matrix dx(dy.rows(), d);
  const double dd = static_cast<double>(d);
  for (Index r = 0; r < dy.rows(); ++r) {
    const double s1 = dxhat.row(r).sum();
    const double s2 = dxhat.row(r).dot(xhat.row(r));
    dx.row(r) = (cache.inv_std(r) / dd) * (dd * dxhat.row(r).array() - s1 - xhat.row(r).array() * s2).matrix();
  }
  return dx;
}

void LayerNorm::collect(ParamList& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

MultiHeadAttention::MultiHeadAttention(std::string name, Index width, Index heads, Rng& rng) : heads_(heads) {
  require(heads > 0 && width > 0 && width % heads == 0, ErrorCode::InvalidArgument,
          "attention width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) + " heads");
  wq_ = make_param(name + ".wq", xavier(width, width, rng));
  wk_ = make_param(name + ".wk", xavier(width, width, rng));
  wv_ = make_param(name + ".wv", xavier(width, width, rng));
  wo_ = make_param(name + ".wo", xavier(width, width, rng));
  bq_ = make_param(name + ".bq", Matrix::Zero(1, width));
  bk_ = make_param(name + ".bk", Matrix::Zero(1, width));
  bv_ = make_param(name + ".bv", Matrix::Zero(1, width));
  bo_ = make_param(name + ".bo", Matrix::Zero(1, width));
}

Matrix MultiHeadAttention::forward(const Matrix& x, Cache* cache) const {
  const Index d = width();
  check_cols(x, d, "attention");
  const Index T = x.rows();
  const Index dh = d / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix q(T, d), k(T, d), v(T, d);
  q.noalias() = x * wq_.value.transpose();
  k.noalias() = x * wk_.value.transpose();
  v.noalias() = x * wv_.value.transpose();
  q.rowwise() += bq_.value.row(0);
  k.rowwise() += bk_.value.row(0);
  v.rowwise() += bv_.value.row(0);
  Matrix concat(T, d);
  std::vector<Matrix> weights;
  if (cache) weights.reserve(static_cast<std::size_t>(heads_));
  Matrix s(T, T);
  for (Index h = 0; h < heads_; ++h) {
    const Index c0 = h * dh;
    s.noalias() = q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose();
    s *= scale;
    for (Index r = 0; r < T; ++r) {
      const double m = s.row(r).maxCoeff();
      s.row(r) = (s.row(r).array() - m).exp().matrix();
      s.row(r) /= s.row(r).sum();
    }
    concat.middleCols(c0, dh).noalias() = s * v.middleCols(c0, dh);
    if (cache) weights.push_back(s);
  }
  Matrix y(T, d);
  y.noalias() = concat * wo_.value.transpose();
  y.rowwise() += bo_.value.row(0);
  if (cache) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
    cache->weights = std::move(weights);
  }
  return y;
}

Matrix MultiHeadAttention::backward(const Cache& cache, const Matrix& dy) {
  const Index d = width();
  const Index T = dy.rows();
  const Index dh = d / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  wo_.grad.noalias() += dy.transpose() * cache.concat;
  bo_.grad.row(0) += dy.colwise().sum();
  Matrix dconcat(T, d);
  dconcat.noalias() = dy * wo_.value;
  Matrix dq(T, d), dk(T, d), dv(T, d);
  Matrix da(T, T);
  for (Index h = 0; h < heads_; ++h) {
    const Index c0 = h * dh;
    const Matrix& a = cache.weights[static_cast<std::size_t>(h)];
    const auto dout = dconcat.middleCols(c0, dh);
    da.noalias() = dout * cache.v.middleCols(c0, dh).transpose();
    dv.middleCols(c0, dh).noalias() = a.transpose() * dout;
    const Eigen::VectorXd rs = (da.array() * a.array()).rowwise().sum();
    Matrix ds = (a.array() * (da.array().colwise() - rs.array())).matrix() * scale;
    dq.middleCols(c0, dh).noalias() = ds * cache.k.middleCols(c0, dh);
    dk.middleCols(c0, dh).noalias() = ds.transpose() * cache.q.middleCols(c0, dh);
  }
  wq_.grad.noalias() += dq.transpose() * cache.input;
  wk_.grad.noalias() += dk.transpose() * cache.input;
  wv_.grad.noalias() += dv.transpose() * cache.input;
  bq_.grad.row(0) += dq.colwise().sum();
  bk_.grad.row(0) += dk.colwise().sum();
  bv_.grad.row(0) += dv.colwise().sum();
  Matrix dx(T, d);
  dx.noalias() = dq * wq_.value;
  dx.noalias() += dk * wk_.value;
  dx.noalias() += dv * wv_.value;
  return dx;
}

void MultiHeadAttention::collect(ParamList& out) {
  for (auto* p : {&wq_, &wk_, &wv_, &wo_, &bq_, &bk_, &bv_, &bo_}) out.push_back(p);
}

EncoderBlock::EncoderBlock(std::string name, Index width, Index heads, Index ffn_width, Rng& rng)
    : ln1_(name + ".ln1", width),
      ln2_(name + ".ln2", width),
      attn_(name + ".attn", width, heads, rng),
      ff1_(name + ".ff1", width, ffn_width, Activation::Relu, rng),
      ff2_(name + ".ff2", ffn_width, width, Activation::Linear, rng) {}

Matrix EncoderBlock::forward(const Matrix& x, Cache* cache) const {
  Matrix h = x + attn_.forward(ln1_.forward(x, cache ? &cache->ln1 : nullptr), cache ? &cache->attn : nullptr);
  const Matrix b = ln2_.forward(h, cache ? &cache->ln2 : nullptr);
  h += ff2_.forward(ff1_.forward(b, cache ? &cache->ff1 : nullptr), cache ? &cache->ff2 : nullptr);
  return h;
}

Matrix EncoderBlock::backward(const Cache& cache, const Matrix& dy) {
  Matrix dh = dy + ln2_.backward(cache.ln2, ff1_.backward(cache.ff1, ff2_.backward(cache.ff2, dy)));
  return dh + ln1_.backward(cache.ln1, attn_.backward(cache.attn, dh));
}

void EncoderBlock::collect(ParamList& out) {
  ln1_.collect(out);
  attn_.collect(out);
  ln2_.collect(out);
  ff1_.collect(out);
  ff2_.collect(out);
}

Matrix sinusoidal_positions(Index length, Index width) {
  Matrix pe(length, width);
  for (Index t = 0; t < length; ++t)
    for (Index i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      const double arg = static_cast<double>(t) * freq;
      pe(t, i) = (i % 2 == 0) ? std::sin(arg) : std::cos(arg);
    }
  return pe;
}

Mlp::Mlp(std::string name, const std::vector<Index>& widths, Activation hidden, Activation output, Rng& rng) {
  require(widths.size() >= 2, ErrorCode::InvalidArgument, "an MLP needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    layers_.emplace_back(name + "." + std::to_string(i), widths[i], widths[i + 1], last ? output : hidden, rng);
  }
}

Matrix Mlp::forward(const Matrix& x, Cache* cache) const {
  if (cache) {
    cache->version = version();
    cache->layers.assign(layers_.size(), {});
  }
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i].forward(h, cache ? &cache->layers[i] : nullptr);
  return h;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& dy) {
  require(cache.version == version() && cache.layers.size() == layers_.size(), ErrorCode::StaleCache,
          "forward cache predates the last parameter update");
  Matrix g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i].backward(cache.layers[i], g);
  return g;
}

ParamList Mlp::parameters() {
  ParamList out;
  for (auto& l : layers_) l.collect(out);
  return out;
}

std::uint64_t Mlp::version() const {
  std::uint64_t v = 0;
  for (auto& l : layers_) v += const_cast<Dense&>(l).weight().version + const_cast<Dense&>(l).bias().version;
  return v;
}

std::vector<Index> Mlp::widths() const {
  std::vector<Index> w;
  if (layers_.empty()) return w;
  w.push_back(layers_.front().in());
  for (auto& l : layers_) w.push_back(l.out());
  return w;
}

TransformerNet::TransformerNet(const TransformerConfig& config, Rng& rng) : config_(config) {
  require(config.blocks >= 1, ErrorCode::InvalidArgument, "transformer needs at least one block");
  in_proj_ = Dense("in_proj", config.in_channels, config.width, Activation::Linear, rng);
  for (Index b = 0; b < config.blocks; ++b)
    blocks_.emplace_back("block" + std::to_string(b), config.width, config.heads, config.ffn_width, rng);
  final_norm_ = LayerNorm("final_norm", config.width);
  out_proj_ = Dense("out_proj", config.width, config.out_channels, Activation::Linear, rng);
}

Matrix TransformerNet::forward(const Matrix& x, Cache* cache) const {
  if (cache) {
    cache->version = version();
    cache->blocks.assign(blocks_.size(), {});
  }
  Matrix h = in_proj_.forward(x, cache ? &cache->in_proj : nullptr);
  h += sinusoidal_positions(x.rows(), config_.width);
  for (std::size_t b = 0; b < blocks_.size(); ++b) h = blocks_[b].forward(h, cache ? &cache->blocks[b] : nullptr);
  h = final_norm_.forward(h, cache ? &cache->final_norm : nullptr);
  return out_proj_.forward(h, cache ? &cache->out_proj : nullptr);
}

Matrix TransformerNet::backward(const Cache& cache, const Matrix& dy) {
  require(cache.version == version() && cache.blocks.size() == blocks_.size(), ErrorCode::StaleCache,
          "forward cache predates the last parameter update");
  Matrix g = final_norm_.backward(cache.final_norm, out_proj_.backward(cache.out_proj, dy));
  for (std::size_t b = blocks_.size(); b-- > 0;) g = blocks_[b].backward(cache.blocks[b], g);
  return in_proj_.backward(cache.in_proj, g);
}

ParamList TransformerNet::parameters() {
  ParamList out;
  in_proj_.collect(out);
  for (auto& b : blocks_) b.collect(out);
  final_norm_.collect(out);
  out_proj_.collect(out);
  return out;
}

std::uint64_t TransformerNet::version() const {
  return params_version(const_cast<TransformerNet*>(this)->parameters());
}

}  // namespace ff::nn
