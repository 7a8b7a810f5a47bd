// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "dustlayer/space_grid.hpp"

namespace dustlayer {

/// Coefficient view for one p-slice of the transport operator. Kz is indexed
/// per z-node with the given stride (1 for packed slices, np inside Field3
/// storage).
struct TransportCoeffs {
  const double* V = nullptr;   // per z-node
  const double* Kx = nullptr;  // per z-node
  const double* Kz = nullptr;  // per z-node, strided
  std::size_t kz_stride = 1;
  double w = 0.0;

  double kz_at(int j) const { return Kz[static_cast<std::size_t>(j) * kz_stride]; }
};

/// Explicit right-hand side of u_t = -V u_x + Kx u_xx + d/dz(w u + Kz u_z)
/// on the periodic-x / bounded-z grid, in flux form so that column sums
/// telescope exactly:
///   - first-order upwind for the V u_x and w u_z advection terms,
///   - second-order central differences for both diffusion terms,
///   - half cells at z = 0 and z = z_top; the top face carries the advective
///     upwind flux with zero outside concentration and no diffusive flux,
///   - the surface face flux is taken from `surface_flux` (per x-node);
///     pass an empty span for a zero surface flux.
/// Reads u with stride `stride` between z-neighbours (x-neighbours are
/// stride * nz apart); writes the same layout into out.
struct TransportKernel {
  SpaceGrid grid;

  void rhs_rows(const double* u, std::size_t stride, const TransportCoeffs& c,
                std::span<const double> surface_flux, double* out, int j_begin,
                int j_end) const {
    const int nx = grid.nx, nz = grid.nz;
    const double dx = grid.dx(), dz = grid.dz();
    const double inv_dx = 1.0 / dx, inv_dx2 = inv_dx * inv_dx, inv_dz = 1.0 / dz;
    const double w = c.w;

    for (int j = j_begin; j < j_end; ++j) {
      const double vj = c.V[j];
      const double kxj = c.Kx[j];
      const double cellw = grid.z_cell_width(j);
      const double kz_j = c.kz_at(j);
      const double kz_up = j + 1 < nz ? 0.5 * (kz_j + c.kz_at(j + 1)) : 0.0;
      const double kz_dn = j > 0 ? 0.5 * (c.kz_at(j - 1) + kz_j) : 0.0;

      for (int i = 0; i < nx; ++i) {
        const std::size_t idx = (static_cast<std::size_t>(i) * nz + j) * stride;
        const std::size_t ixp = (static_cast<std::size_t>(i + 1 == nx ? 0 : i + 1) * nz + j) * stride;
        const std::size_t ixm = (static_cast<std::size_t>(i == 0 ? nx - 1 : i - 1) * nz + j) * stride;
        const double uc = u[idx];

        const double adv_x = vj >= 0.0 ? vj * (uc - u[ixm]) * inv_dx
                                       : vj * (u[ixp] - uc) * inv_dx;
        const double diff_x = kxj * (u[ixp] - 2.0 * uc + u[ixm]) * inv_dx2;

        double flux_up, flux_dn;
        if (j + 1 < nz) {
          const double uj1 = u[idx + stride];
          flux_up = w * (w >= 0.0 ? uj1 : uc) + kz_up * (uj1 - uc) * inv_dz;
        } else {
          // Domain truncation: no diffusive flux; upwind advective flux with
          // zero concentration above the lid.
          flux_up = w >= 0.0 ? 0.0 : w * uc;
        }
        if (j > 0) {
          const double ujm = u[idx - stride];
          flux_dn = w * (w >= 0.0 ? uc : ujm) + kz_dn * (uc - ujm) * inv_dz;
        } else {
          flux_dn = surface_flux.empty() ? 0.0 : surface_flux[static_cast<std::size_t>(i)];
        }

        out[idx] = -adv_x + diff_x + (flux_up - flux_dn) / cellw;
      }
    }
  }

  void rhs(const double* u, std::size_t stride, const TransportCoeffs& c,
           std::span<const double> surface_flux, double* out) const {
    rhs_rows(u, stride, c, surface_flux, out, 0, grid.nz);
  }

  /// Largest per-node rate of the explicit operator; stable forward Euler
  /// needs dt * rate <= 1. The boundary half cells double the z-rates.
  double max_rate(const TransportCoeffs& c) const {
    double worst = 0.0;
    const double dx = grid.dx(), dz = grid.dz();
    double kz_max = 0.0;
    for (int j = 0; j < grid.nz; ++j) kz_max = std::max(kz_max, c.kz_at(j));
    for (int j = 0; j < grid.nz; ++j) {
      const double r = 2.0 * c.Kx[j] / (dx * dx) + std::abs(c.V[j]) / dx +
                       4.0 * kz_max / (dz * dz) + 2.0 * std::abs(c.w) / dz;
      worst = std::max(worst, r);
    }
    return worst;
  }
};

/// Shared step-size policy for the explicit schemes.
struct StepControl {
  double dt = 0.0;            // fixed explicit step; 0 derives it from the CFL rate
  double cfl_safety = 0.9;    // fraction of the stability limit when dt == 0
  double blowup_guard = 1e12; // abort when max |field| exceeds this
  int threads = 1;            // worker cap for the deterministic parallel loops
};

namespace detail {

/// Uniform-substep plan for one output segment [t0, t1].
struct Segment {
  double t1 = 0.0;
  long steps = 0;
  double h = 0.0;
};

inline Segment plan_segment(double t0, double t1, double dt_target) {
  Segment s;
  s.t1 = t1;
  const double len = t1 - t0;
  if (len <= 0.0) {
    s.steps = 0;
    s.h = 0.0;
    return s;
  }
  s.steps = std::max(1L, static_cast<long>(std::ceil(len / dt_target - 1e-12)));
  s.h = len / static_cast<double>(s.steps);
  return s;
}

}  // namespace detail

}  // namespace dustlayer
