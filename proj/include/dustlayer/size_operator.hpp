// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>

#include "dustlayer/errors.hpp"
#include "dustlayer/particle_grid.hpp"

namespace dustlayer {

/// Matrix form of the coagulation-dissociation operator L_p on a ParticleGrid:
/// (L_p f)(p_i) ~ sum_j A_ij f(p_j). Every instance carries a left null vector
/// under the quadrature pairing, so (A f, h0*) = 0 for all f and generalized
/// mass is neutral under size relaxation.
struct SizeOperator {
  Eigen::MatrixXd matrix;
  ParticleGrid grid;

  Eigen::Index size() const { return matrix.rows(); }

  double norm_inf() const { return matrix.cwiseAbs().rowwise().sum().maxCoeff(); }

  /// max_j |sum_i q_i A_ij|, the defect of the constant-direction left null
  /// vector. Zero (to roundoff) for conservatively built operators.
  double column_mass_defect() const {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < matrix.rows(); ++i) s += grid.weights[i] * matrix(i, j);
      worst = std::max(worst, std::abs(s));
    }
    return worst;
  }
};

/// Builds the conservative operator from gain-kernel samples K(p_i, p_j):
/// gain A_ij = K(p_i, p_j) q_j for i != j, and the diagonal loss is chosen so
/// every column is quadrature-neutral, sum_i q_i A_ij = 0. The constant
/// function is then a left null vector and generalized mass is conserved by
/// construction.
inline SizeOperator build_conservative_operator(const Eigen::MatrixXd& kernel,
                                                ParticleGrid grid) {
  grid.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
  if (kernel.rows() != n || kernel.cols() != n)
    throw ConfigError("build_conservative_operator: kernel shape does not match grid");
  if (!kernel.allFinite())
    throw ConfigError("build_conservative_operator: non-finite kernel entry");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && kernel(i, j) < 0.0)
        throw ConfigError("build_conservative_operator: negative off-diagonal gain entry");

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) continue;
      a(i, j) = kernel(i, j) * grid.weights[j];
      loss += grid.weights[i] * a(i, j);
    }
    a(j, j) = -loss / grid.weights[j];
  }
  return SizeOperator{std::move(a), std::move(grid)};
}

/// Wraps a raw matrix, verifying that a left null vector exists under the
/// quadrature pairing (smallest |eigenvalue| of the transpose within
/// tol_rel * ||A||).
inline SizeOperator make_size_operator(Eigen::MatrixXd matrix, ParticleGrid grid,
                                       double tol_rel = 1e-8) {
  grid.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
  if (matrix.rows() != n || matrix.cols() != n)
    throw ConfigError("make_size_operator: matrix shape does not match grid");
  if (!matrix.allFinite()) throw ConfigError("make_size_operator: non-finite matrix entry");

  SizeOperator op{std::move(matrix), std::move(grid)};
  const double scale = std::max(op.norm_inf(), 1e-300);
  Eigen::EigenSolver<Eigen::MatrixXd> es(op.matrix.transpose(), false);
  if (es.info() != Eigen::Success)
    throw NumericalError("make_size_operator: eigensolver failed");
  const double smallest = es.eigenvalues().cwiseAbs().minCoeff();
  if (smallest > tol_rel * scale)
    throw Condition1Error("make_size_operator: no left null vector (smallest |lambda| = " +
                          std::to_string(smallest) + ")");
  return op;
}

/// The built-in two-bin exchange operator: rate a moves mass bin1 -> bin2,
/// rate b moves it back. On unit weights A = [[-a, b], [a, -b]].
inline SizeOperator builtin_two_bin(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw ConfigError("builtin_two_bin: rates must be >= 0");
  Eigen::MatrixXd kernel(2, 2);
  kernel << 0.0, b, a, 0.0;
  return build_conservative_operator(kernel, ParticleGrid::unit_bins(2));
}

/// The built-in three-bin nearest-neighbour chain: K(p_i, p_j) = 1 for
/// |i - j| = 1, zero otherwise, on unit weights.
inline SizeOperator builtin_three_bin() {
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(3, 3);
  kernel(0, 1) = kernel(1, 0) = kernel(1, 2) = kernel(2, 1) = 1.0;
  return build_conservative_operator(kernel, ParticleGrid::unit_bins(3));
}

}  // namespace dustlayer
