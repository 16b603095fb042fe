#pragma once

#include "ff/motion.hpp"

#include <vector>

namespace ff::nn {

/// Per-channel affine standardization fitted over the rows of several matrices.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const std::vector<Matrix>& data);
  static Standardizer identity(Index channels);
  Matrix apply(const Matrix& x) const;
  Matrix invert(const Matrix& z) const;
  Index channels() const noexcept { return mean.size(); }
};

}  // namespace ff::nn
