// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference implementations. These stay independent of the library
// code paths they are used to check: plain Gaussian elimination, a Taylor
// matrix exponential with scaling-and-squaring, and a fixed-step RK4
// integrator.
#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracles {

using cplx = std::complex<double>;

/// Dense complex linear solve A x = b by Gaussian elimination with partial
/// pivoting. A is row-major n x n.
inline std::vector<cplx> solve_dense(std::vector<cplx> a, std::vector<cplx> b,
                                     std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(a[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double m = std::abs(a[r * n + col]);
      if (m > best) {
        best = m;
        piv = r;
      }
    }
    if (best == 0.0) throw std::runtime_error("solve_dense: singular matrix");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const cplx f = a[r * n + col] / a[col * n + col];
      if (f == cplx{0.0, 0.0}) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<cplx> x(n);
  for (std::size_t ri = n; ri-- > 0;) {
    cplx acc = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) acc -= a[ri * n + c] * x[c];
    x[ri] = acc / a[ri * n + ri];
  }
  return x;
}

/// Matrix exponential of a real n x n matrix (row-major) by Taylor series
/// with scaling and squaring.
inline std::vector<double> expm(std::vector<double> a, std::size_t n) {
  double norm = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < n; ++c) row += std::abs(a[r * n + c]);
    norm = std::max(norm, row);
  }
  int squarings = 0;
  while (norm > 0.5) {
    norm *= 0.5;
    ++squarings;
  }
  const double scale = 1.0 / static_cast<double>(1ull << squarings);
  for (double& v : a) v *= scale;

  auto matmul = [n](const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> out(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < n; ++k) {
        const double xv = x[r * n + k];
        if (xv == 0.0) continue;
        for (std::size_t c = 0; c < n; ++c) out[r * n + c] += xv * y[k * n + c];
      }
    return out;
  };

  std::vector<double> result(n * n, 0.0), term(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) result[i * n + i] = term[i * n + i] = 1.0;
  for (int k = 1; k <= 40; ++k) {
    term = matmul(term, a);
    for (double& v : term) v /= static_cast<double>(k);
    double tnorm = 0.0;
    for (double v : term) tnorm = std::max(tnorm, std::abs(v));
    for (std::size_t i = 0; i < n * n; ++i) result[i] += term[i];
    if (tnorm < 1e-20) break;
  }
  for (int s = 0; s < squarings; ++s) result = matmul(result, result);
  return result;
}

/// Classical fixed-step RK4 for y' = f(t, y), scalar.
inline double rk4(const std::function<double(double, double)>& f, double y0, double t0,
                  double t1, int steps) {
  double y = y0, t = t0;
  const double h = (t1 - t0) / steps;
  for (int s = 0; s < steps; ++s) {
    const double k1 = f(t, y);
    const double k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    const double k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    const double k4 = f(t + h, y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
  }
  return y;
}

}  // namespace oracles
