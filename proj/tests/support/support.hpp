#pragma once

#include "ff/motion.hpp"
#include "ff/nn/layers.hpp"
#include "ff/nn/optim.hpp"
#include "ff/random.hpp"
#include "ff/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace fftest {

using ff::Index;
using ff::Matrix;

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0);

/// Fresh empty directory under the system temp dir; removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Default-config synthetic gait of one subject.
ff::GeneratedGait synthetic_gait(std::uint64_t seed, Index strides,
                                 ff::FatigueState state = ff::FatigueState::NonFatigued, int subject = 0);

/// Largest per-tensor relative error ||analytic - numeric|| / (||analytic|| + ||numeric||)
/// of a scalar loss with respect to `params` and, if given, the input `x`.
struct GradCheck {
  double max_param_error = 0.0;
  double input_error = 0.0;
  double worst() const { return std::max(max_param_error, input_error); }
};

/// `loss(x)` returns the scalar loss; `backward(x)` runs forward+backward with
/// zeroed parameter grads and returns d(loss)/dx.
GradCheck check_gradients(const ff::nn::ParamList& params, Matrix& x, const std::function<double(const Matrix&)>& loss,
                          const std::function<Matrix(const Matrix&)>& backward, double h = 1e-6);

/// Worst gradient-check error per nn-core layer kind over `configs` random
/// configurations each (random sizes, heads, activations and parameters).
struct LayerGradReport {
  std::string layer;
  int configs = 0;
  double worst = 0.0;
};
std::vector<LayerGradReport> layer_gradient_checks(int configs, std::uint64_t seed);

/// Stdout/stderr and exit status of a shell command.
struct CommandResult {
  int status = 0;
  std::string output;
};
CommandResult run_command(const std::string& command);

}  // namespace fftest
