// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dustlayer/errors.hpp"

namespace dustlayer {

/// Discretization of the particle-size set P. Nodes are sizes p_i, weights
/// are quadrature weights q_i for integrals over P; the weighted pairing
/// (f, g) = sum_i q_i f_i g_i is the inner product used everywhere.
struct ParticleGrid {
  std::vector<double> nodes;    // strictly increasing
  std::vector<double> weights;  // all positive

  std::size_t size() const { return nodes.size(); }

  void validate() const {
    if (nodes.empty()) throw ConfigError("ParticleGrid: needs at least one node");
    if (nodes.size() != weights.size())
      throw ConfigError("ParticleGrid: nodes/weights size mismatch");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!std::isfinite(nodes[i]) || !std::isfinite(weights[i]))
        throw ConfigError("ParticleGrid: non-finite entry");
      if (weights[i] <= 0.0) throw ConfigError("ParticleGrid: weights must be positive");
      if (i > 0 && nodes[i] <= nodes[i - 1])
        throw ConfigError("ParticleGrid: nodes must be strictly increasing");
    }
  }

  /// Single-bin degenerate grid; the quadrature weight is 1 by convention.
  static ParticleGrid single(double p = 1.0) {
    ParticleGrid g{{p}, {1.0}};
    g.validate();
    return g;
  }

  /// Explicit nodes and weights.
  static ParticleGrid with_weights(std::vector<double> nodes, std::vector<double> weights) {
    ParticleGrid g{std::move(nodes), std::move(weights)};
    g.validate();
    return g;
  }

  /// Trapezoid weights on an arbitrary increasing node list.
  static ParticleGrid trapezoid(std::vector<double> nodes) {
    if (nodes.size() == 1) return single(nodes[0]);
    std::vector<double> w(nodes.size(), 0.0);
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      const double h = nodes[i + 1] - nodes[i];
      w[i] += 0.5 * h;
      w[i + 1] += 0.5 * h;
    }
    return with_weights(std::move(nodes), std::move(w));
  }

  /// Uniform nodes on [p1, p2] with trapezoid weights.
  static ParticleGrid uniform(double p1, double p2, std::size_t count) {
    if (count == 0) throw ConfigError("ParticleGrid: count must be >= 1");
    if (count == 1) return single(0.5 * (p1 + p2));
    std::vector<double> nodes(count);
    const double h = (p2 - p1) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) nodes[i] = p1 + h * static_cast<double>(i);
    return trapezoid(std::move(nodes));
  }

  /// Unit-weight integer-size grid 1..n, used by the built-in operators.
  static ParticleGrid unit_bins(std::size_t n) {
    std::vector<double> nodes(n), w(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) nodes[i] = static_cast<double>(i + 1);
    return with_weights(std::move(nodes), std::move(w));
  }

  bool same_as(const ParticleGrid& o) const {
    return nodes == o.nodes && weights == o.weights;
  }
};

namespace detail {
inline void check_pairing_sizes(std::size_t nf, std::size_t ng, const ParticleGrid& grid) {
  if (nf != grid.size() || ng != grid.size())
    throw GridMismatchError("inner_product: sample length does not match grid (" +
                            std::to_string(nf) + ", " + std::to_string(ng) + " vs " +
                            std::to_string(grid.size()) + ")");
}
}  // namespace detail

/// Quadrature pairing (f, g) = sum_i q_i f_i g_i.
inline double inner_product(std::span<const double> f, std::span<const double> g,
                            const ParticleGrid& grid) {
  detail::check_pairing_sizes(f.size(), g.size(), grid);
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) acc += grid.weights[i] * f[i] * g[i];
  return acc;
}

/// Bilinear complex pairing (no conjugation); used for biorthogonality of
/// complex eigenmode pairs.
inline std::complex<double> inner_product(std::span<const std::complex<double>> f,
                                          std::span<const std::complex<double>> g,
                                          const ParticleGrid& grid) {
  detail::check_pairing_sizes(f.size(), g.size(), grid);
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) acc += grid.weights[i] * f[i] * g[i];
  return acc;
}

/// Quadrature norm sqrt(sum_i q_i |f_i|^2).
inline double quad_norm(std::span<const double> f, const ParticleGrid& grid) {
  return std::sqrt(inner_product(f, f, grid));
}

inline double quad_norm(std::span<const std::complex<double>> f, const ParticleGrid& grid) {
  detail::check_pairing_sizes(f.size(), f.size(), grid);
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) acc += grid.weights[i] * std::norm(f[i]);
  return std::sqrt(acc);
}

}  // namespace dustlayer
