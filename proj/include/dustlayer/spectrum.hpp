// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dustlayer/errors.hpp"
#include "dustlayer/particle_grid.hpp"
#include "dustlayer/size_operator.hpp"

namespace dustlayer {

/// Spectral decomposition of a SizeOperator. Eigenvalues are ordered with the
/// zero mode first and the rest by descending real part. Right modes h_i and
/// adjoint modes g_i are biorthogonal under the bilinear quadrature pairing,
/// <h_i, g_j> = delta_ij; h0 is the equilibrium size distribution scaled to
/// unit quadrature integral, and h0* (= g_0, real) satisfies (h0, h0*) = 1.
struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  Eigen::MatrixXcd right_modes;    // column i = h_i
  Eigen::MatrixXcd adjoint_modes;  // column i = g_i, <h_i, g_i> = 1
  Eigen::VectorXd h0;              // real equilibrium mode, unit integral
  Eigen::VectorXd h0_adj;          // real adjoint null mode h0*
  double spectral_gap = 0.0;       // -max_{i>=1} Re lambda_i; +inf when n == 1
  double operator_norm = 0.0;      // ||A||_inf of the decomposed operator
  ParticleGrid grid;

  Eigen::Index size() const { return right_modes.rows(); }
  /// Number of decaying modes (i >= 1).
  Eigen::Index layer_mode_count() const { return size() - 1; }
};

namespace detail {

/// Divide out the phase of the largest-magnitude component (ties broken by
/// lowest index) so eigenvector columns are deterministic.
inline void fix_phase(Eigen::VectorXcd& v) {
  Eigen::Index k = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double m = std::abs(v[i]);
    if (m > best + 1e-15 * best) {
      best = m;
      k = i;
    }
  }
  if (best <= 0.0) return;
  v /= (v[k] / best);
}

inline double imag_fraction(const Eigen::VectorXcd& v) {
  const double re = v.real().norm();
  const double im = v.imag().norm();
  return im / std::max(re, 1e-300);
}

}  // namespace detail

/// Full eigendecomposition of the operator and its transpose, with Condition 1
/// checks: exactly one eigenvalue within tol_zero of zero, all others with
/// Re lambda <= -gap_min. tol_zero <= 0 selects the default 1e-8 * ||A||.
inline Spectrum spectral_decompose(const SizeOperator& op, double tol_zero = 0.0,
                                   double gap_min = 1e-6) {
  const Eigen::Index n = op.size();
  const double anorm = op.norm_inf();
  if (tol_zero <= 0.0) tol_zero = 1e-8 * anorm;

  Eigen::EigenSolver<Eigen::MatrixXd> right(op.matrix, true);
  Eigen::EigenSolver<Eigen::MatrixXd> left(op.matrix.transpose(), true);
  if (right.info() != Eigen::Success || left.info() != Eigen::Success)
    throw NumericalError("spectral_decompose: eigensolver failed");

  const Eigen::VectorXcd lam = right.eigenvalues();

  // Locate the zero mode and verify simplicity and the spectral gap.
  std::vector<Eigen::Index> zero_idx;
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(lam[i]) <= tol_zero) zero_idx.push_back(i);
  if (zero_idx.empty())
    throw Condition1Error("spectral_decompose: ZeroModeMissing (no eigenvalue within " +
                          std::to_string(tol_zero) + " of zero)");
  if (zero_idx.size() > 1)
    throw Condition1Error("spectral_decompose: ZeroModeNotSimple (" +
                          std::to_string(zero_idx.size()) + " eigenvalues near zero)");

  std::vector<Eigen::Index> order;
  order.reserve(n);
  order.push_back(zero_idx[0]);
  std::vector<Eigen::Index> rest;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != zero_idx[0]) rest.push_back(i);
  std::sort(rest.begin(), rest.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (lam[a].real() != lam[b].real()) return lam[a].real() > lam[b].real();
    if (lam[a].imag() != lam[b].imag()) return lam[a].imag() > lam[b].imag();
    return a < b;
  });
  for (Eigen::Index i : rest) {
    if (lam[i].real() > -gap_min)
      throw Condition1Error("spectral_decompose: SpectralGapViolated (Re lambda = " +
                            std::to_string(lam[i].real()) + " > -gap_min)");
    order.push_back(i);
  }

  Spectrum sp;
  sp.grid = op.grid;
  sp.operator_norm = anorm;
  sp.eigenvalues.resize(n);
  sp.right_modes.resize(n, n);
  sp.adjoint_modes.resize(n, n);

  // Match left eigenvalues to the ordered right ones.
  const Eigen::VectorXcd lam_left = left.eigenvalues();
  std::vector<bool> used(n, false);
  const double match_tol = 1e-6 * std::max(anorm, 1.0) + 1e-12;
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::complex<double> target = lam[order[r]];
    Eigen::Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index l = 0; l < n; ++l) {
      if (used[l]) continue;
      const double d = std::abs(lam_left[l] - target);
      if (d < best_d) {
        best_d = d;
        best = l;
      }
    }
    if (best < 0 || best_d > match_tol)
      throw NumericalError("spectral_decompose: left/right eigenvalue mismatch");
    used[best] = true;

    Eigen::VectorXcd h = right.eigenvectors().col(order[r]);
    Eigen::VectorXcd y = left.eigenvectors().col(best);
    detail::fix_phase(h);
    detail::fix_phase(y);
    // Adjoint mode under the weighted pairing: g = y ./ q.
    for (Eigen::Index i = 0; i < n; ++i) y[i] /= op.grid.weights[i];

    sp.eigenvalues[r] = target;
    sp.right_modes.col(r) = h;
    sp.adjoint_modes.col(r) = y;
  }

  // Equilibrium mode: real, nonnegative, unit quadrature integral.
  {
    Eigen::VectorXcd h = sp.right_modes.col(0);
    if (detail::imag_fraction(h) > 1e-8)
      throw Condition1Error("spectral_decompose: ComplexEquilibrium (zero mode not real)");
    Eigen::VectorXd h0 = h.real();
    double integral = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) integral += op.grid.weights[i] * h0[i];
    if (std::abs(integral) < 1e-12 * h0.norm())
      throw Condition1Error("spectral_decompose: equilibrium mode has zero integral");
    h0 /= integral;
    const double hmax = h0.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i)
      if (h0[i] < -1e-10 * hmax)
        throw Condition1Error(
            "spectral_decompose: equilibrium mode has negative components");
    sp.h0 = h0;
    sp.right_modes.col(0) = h0.cast<std::complex<double>>();
  }

  // Unit quadrature norm and biorthogonal adjoint scaling for decaying modes.
  for (Eigen::Index r = 1; r < n; ++r) {
    Eigen::VectorXcd h = sp.right_modes.col(r);
    double nrm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) nrm += op.grid.weights[i] * std::norm(h[i]);
    nrm = std::sqrt(nrm);
    if (nrm <= 0.0) throw NumericalError("spectral_decompose: zero right mode");
    h /= nrm;
    sp.right_modes.col(r) = h;
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    std::complex<double> d = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      d += op.grid.weights[i] * sp.right_modes(i, r) * sp.adjoint_modes(i, r);
    double hn = 0.0, gn = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      hn += op.grid.weights[i] * std::norm(sp.right_modes(i, r));
      gn += op.grid.weights[i] * std::norm(sp.adjoint_modes(i, r));
    }
    if (std::abs(d) < 1e-10 * std::sqrt(hn * gn))
      throw Condition1Error("spectral_decompose: degenerate left/right mode pairing");
    sp.adjoint_modes.col(r) /= d;
  }

  // The adjoint null mode is real once paired against the real h0.
  {
    Eigen::VectorXcd g0 = sp.adjoint_modes.col(0);
    if (detail::imag_fraction(g0) > 1e-8)
      throw Condition1Error("spectral_decompose: ComplexEquilibrium (adjoint null not real)");
    sp.h0_adj = g0.real();
    sp.adjoint_modes.col(0) = sp.h0_adj.cast<std::complex<double>>();
  }

  sp.spectral_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 1; r < n; ++r)
    sp.spectral_gap = std::min(sp.spectral_gap, -sp.eigenvalues[r].real());

  return sp;
}

/// Expansion coefficients of a size-profile in the eigenmode basis,
/// c_i = <f, g_i>; verifies that sum_i c_i h_i reconstructs f.
inline std::vector<std::complex<double>> project_onto_modes(std::span<const double> f,
                                                            const Spectrum& spectrum,
                                                            double tol = 1e-8) {
  const Eigen::Index n = spectrum.size();
  if (static_cast<Eigen::Index>(f.size()) != n)
    throw GridMismatchError("project_onto_modes: sample length does not match spectrum");

  std::vector<std::complex<double>> c(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      acc += spectrum.grid.weights[i] * f[i] * spectrum.adjoint_modes(i, r);
    c[r] = acc;
  }

  double res = 0.0, ref = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::complex<double> rec = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) rec += c[r] * spectrum.right_modes(i, r);
    res += spectrum.grid.weights[i] * std::norm(rec - f[i]);
    ref += spectrum.grid.weights[i] * f[i] * f[i];
  }
  if (std::sqrt(res) > tol * std::max(std::sqrt(ref), 1e-30))
    throw NumericalError("project_onto_modes: IllConditionedModeBasis (reconstruction residual " +
                         std::to_string(std::sqrt(res)) + ")");
  return c;
}

}  // namespace dustlayer
