#pragma once

#include "ff/motion.hpp"
#include "ff/random.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ff::nn {

using ff::Index;
using ff::Matrix;

/// A trainable tensor with its accumulated gradient. `version` is bumped by
/// every optimizer update so caches taken before the update can be rejected.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  std::uint64_t version = 0;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using ParamList = std::vector<Parameter*>;

void zero_grads(const ParamList& params);
std::uint64_t params_version(const ParamList& params);
Index parameter_count(const ParamList& params);

enum class Activation { Linear, Relu, Tanh };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// Xavier-uniform weight (out x in), zero bias. Rows of the input are samples.
class Dense {
 public:
  struct Cache {
    Matrix input;
    Matrix output;
  };

  Dense() = default;
  Dense(std::string name, Index in, Index out, Activation act, Rng& rng);

  Matrix forward(const Matrix& x, Cache* cache) const;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  Matrix backward(const Cache& cache, const Matrix& dy);
  void collect(ParamList& out);

  Index in() const noexcept { return weight_.value.cols(); }
  Index out() const noexcept { return weight_.value.rows(); }
  Activation activation() const noexcept { return act_; }
  Parameter& weight() noexcept { return weight_; }
  Parameter& bias() noexcept { return bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
  Activation act_ = Activation::Linear;
};

class LayerNorm {
 public:
  struct Cache {
    Matrix normalized;
    Eigen::VectorXd inv_std;
  };

  LayerNorm() = default;
  LayerNorm(std::string name, Index width);

  Matrix forward(const Matrix& x, Cache* cache) const;
  Matrix backward(const Cache& cache, const Matrix& dy);
  void collect(ParamList& out);

  Parameter& gamma() noexcept { return gamma_; }
  Parameter& beta() noexcept { return beta_; }

 private:
  Parameter gamma_;
  Parameter beta_;
  double eps_ = 1e-5;
};

/// Bidirectional scaled dot-product attention over the rows of a T x width input.
class MultiHeadAttention {
 public:
  struct Cache {
    Matrix input, q, k, v, concat;
    std::vector<Matrix> weights;  // per head, T x T, rows sum to 1
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(std::string name, Index width, Index heads, Rng& rng);

  Matrix forward(const Matrix& x, Cache* cache) const;
  Matrix backward(const Cache& cache, const Matrix& dy);
  void collect(ParamList& out);

  Index width() const noexcept { return wq_.value.rows(); }
  Index heads() const noexcept { return heads_; }
  Parameter& wq() noexcept { return wq_; }
  Parameter& wk() noexcept { return wk_; }
  Parameter& wv() noexcept { return wv_; }
  Parameter& wo() noexcept { return wo_; }

 private:
  Parameter wq_, wk_, wv_, wo_;
  Parameter bq_, bk_, bv_, bo_;
  Index heads_ = 1;
};

/// Pre-norm encoder block: x + MHA(LN(x)), then h + FFN(LN(h)).
class EncoderBlock {
 public:
  struct Cache {
    LayerNorm::Cache ln1, ln2;
    MultiHeadAttention::Cache attn;
    Dense::Cache ff1, ff2;
  };

  EncoderBlock() = default;
  EncoderBlock(std::string name, Index width, Index heads, Index ffn_width, Rng& rng);

  Matrix forward(const Matrix& x, Cache* cache) const;
  Matrix backward(const Cache& cache, const Matrix& dy);
  void collect(ParamList& out);

 private:
  LayerNorm ln1_, ln2_;
  MultiHeadAttention attn_;
  Dense ff1_, ff2_;
};

/// Fixed sinusoidal position table, rows = positions.
Matrix sinusoidal_positions(Index length, Index width);

/// Stack of dense layers.
class Mlp {
 public:
  struct Cache {
    std::uint64_t version = 0;
    std::vector<Dense::Cache> layers;
  };

  Mlp() = default;
  /// widths = {in, h1, ..., out}; hidden layers use `hidden`, the last `output`.
  Mlp(std::string name, const std::vector<Index>& widths, Activation hidden, Activation output, Rng& rng);

  Matrix forward(const Matrix& x, Cache* cache) const;
  /// Throws ErrorCode::StaleCache if parameters changed since `cache` was taken.
  Matrix backward(const Cache& cache, const Matrix& dy);
  ParamList parameters();
  std::uint64_t version() const;

  Index in() const { return layers_.front().in(); }
  Index out() const { return layers_.back().out(); }
  std::vector<Index> widths() const;
  std::vector<Dense>& layers() noexcept { return layers_; }

 private:
  std::vector<Dense> layers_;
};

/// Sequence-to-sequence transformer encoder: input projection, sinusoidal
/// positions, `blocks` encoder blocks, final norm and output projection.
struct TransformerConfig {
  Index in_channels = 8;
  Index out_channels = 8;
  Index width = 40;
  Index heads = 10;
  Index ffn_width = 80;
  Index blocks = 3;
};

class TransformerNet {
 public:
  struct Cache {
    std::uint64_t version = 0;
    Dense::Cache in_proj;
    std::vector<EncoderBlock::Cache> blocks;
    LayerNorm::Cache final_norm;
    Dense::Cache out_proj;
  };

  TransformerNet() = default;
  TransformerNet(const TransformerConfig& config, Rng& rng);

  Matrix forward(const Matrix& x, Cache* cache) const;
  Matrix backward(const Cache& cache, const Matrix& dy);
  ParamList parameters();
  std::uint64_t version() const;
  const TransformerConfig& config() const noexcept { return config_; }

 private:
  TransformerConfig config_;
  Dense in_proj_;
  std::vector<EncoderBlock> blocks_;
  LayerNorm final_norm_;
  Dense out_proj_;
};

}  // namespace ff::nn
