// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dustlayer/errors.hpp"

namespace dustlayer {

/// Structured (x, z) grid. x is uniform and periodic with nx cells on
/// [0, x_length); z holds nz nodes from z = 0 (surface) to z = z_top with the
/// boundary nodes owning half cells, so the trapezoid weights in z coincide
/// with the finite-volume cell widths.
struct SpaceGrid {
  int nx = 0;
  int nz = 0;
  double x_length = 0.0;
  double z_top = 0.0;

  void validate() const {
    if (nx < 1) throw ConfigError("SpaceGrid: nx must be >= 1");
    if (nz < 3) throw ConfigError("SpaceGrid: nz must be >= 3");
    if (!(x_length > 0.0) || !(z_top > 0.0))
      throw ConfigError("SpaceGrid: extents must be positive");
  }

  double dx() const { return x_length / nx; }
  double dz() const { return z_top / (nz - 1); }
  double x(int i) const { return dx() * i; }
  double z(int j) const { return dz() * j; }
  double z_cell_width(int j) const { return (j == 0 || j == nz - 1) ? 0.5 * dz() : dz(); }

  bool operator==(const SpaceGrid& o) const = default;

  std::string describe() const {
    return std::to_string(nx) + "x" + std::to_string(nz);
  }

  /// Grid with both spacings halved (nx doubled, nz -> 2 nz - 1), used for
  /// Richardson refinement.
  SpaceGrid refined() const { return SpaceGrid{2 * nx, 2 * nz - 1, x_length, z_top}; }
};

/// Scalar field on the (x, z) grid; index (i, j) -> i * nz + j.
struct ScalarField2 {
  int nx = 0, nz = 0;
  std::vector<double> data;

  ScalarField2() = default;
  ScalarField2(int nx_, int nz_) : nx(nx_), nz(nz_), data(static_cast<std::size_t>(nx_) * nz_, 0.0) {}
  explicit ScalarField2(const SpaceGrid& g) : ScalarField2(g.nx, g.nz) {}

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * nz + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * nz + j]; }

  double max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
  }
  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Atmospheric concentration field on the (x, z, p) tensor grid.
/// Index (i, j, k) -> (i * nz + j) * np + k; the p-vector at one space point
/// is contiguous, which keeps relaxation substeps cache-friendly.
struct Field3 {
  int nx = 0, nz = 0, np = 0;
  std::vector<double> data;

  Field3() = default;
  Field3(int nx_, int nz_, int np_)
      : nx(nx_), nz(nz_), np(np_),
        data(static_cast<std::size_t>(nx_) * nz_ * np_, 0.0) {}

  std::size_t cell_index(int i, int j) const {
    return (static_cast<std::size_t>(i) * nz + j) * np;
  }
  double& at(int i, int j, int k) { return data[cell_index(i, j) + k]; }
  double at(int i, int j, int k) const { return data[cell_index(i, j) + k]; }
  std::span<double> pvec(int i, int j) { return {data.data() + cell_index(i, j), static_cast<std::size_t>(np)}; }
  std::span<const double> pvec(int i, int j) const {
    return {data.data() + cell_index(i, j), static_cast<std::size_t>(np)};
  }

  bool same_shape(const Field3& o) const { return nx == o.nx && nz == o.nz && np == o.np; }
  double max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
  }
  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Surface concentration on the (x, p) grid; index (i, k) -> i * np + k.
struct SurfaceField {
  int nx = 0, np = 0;
  std::vector<double> data;

  SurfaceField() = default;
  SurfaceField(int nx_, int np_) : nx(nx_), np(np_), data(static_cast<std::size_t>(nx_) * np_, 0.0) {}

  double& at(int i, int k) { return data[static_cast<std::size_t>(i) * np + k]; }
  double at(int i, int k) const { return data[static_cast<std::size_t>(i) * np + k]; }
  std::span<double> pvec(int i) { return {data.data() + static_cast<std::size_t>(i) * np, static_cast<std::size_t>(np)}; }
  std::span<const double> pvec(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * np, static_cast<std::size_t>(np)};
  }

  bool same_shape(const SurfaceField& o) const { return nx == o.nx && np == o.np; }
  double max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
  }
  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

}  // namespace dustlayer
