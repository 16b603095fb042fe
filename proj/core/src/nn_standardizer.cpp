#include "ff/nn/standardizer.hpp"

#include "ff/error.hpp"

namespace ff::nn {

Standardizer Standardizer::fit(const std::vector<Matrix>& data) {
  require(!data.empty(), ErrorCode::InvalidArgument, "cannot fit statistics to an empty set");
  const Index c = data.front().cols();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(c), sq = Eigen::RowVectorXd::Zero(c);
  double n = 0.0;
  for (const auto& m : data) {
    require(m.cols() == c, ErrorCode::ShapeMismatch, "inconsistent channel counts");
    sum += m.colwise().sum();
    n += static_cast<double>(m.rows());
  }
  Standardizer s;
  s.mean = sum / n;
  for (const auto& m : data) sq += (m.rowwise() - s.mean).array().square().matrix().colwise().sum();
  s.scale = (sq / n).array().sqrt().max(1e-6).matrix();
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  require(x.cols() == mean.size(), ErrorCode::ShapeMismatch,
          "expected " + std::to_string(mean.size()) + " channels, got " + std::to_string(x.cols()));
  return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
}

Matrix Standardizer::invert(const Matrix& z) const {
  require(z.cols() == mean.size(), ErrorCode::ShapeMismatch, "channel count mismatch");
  Matrix x = (z.array().rowwise() * scale.array()).matrix();
  x.rowwise() += mean;
  return x;
}

Standardizer Standardizer::identity(Index channels) {
  return {Eigen::RowVectorXd::Zero(channels), Eigen::RowVectorXd::Ones(channels)};
}

}  // namespace ff::nn
