// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dustlayer/effective.hpp"
#include "dustlayer/errors.hpp"
#include "dustlayer/parallel.hpp"
#include "dustlayer/space_grid.hpp"
#include "dustlayer/spectrum.hpp"
#include "dustlayer/transport.hpp"

namespace dustlayer {

/// Time history of the reduced amplitude phi0(x, z, t).
struct ReducedTrajectory {
  SpaceGrid grid;
  double c_ef = 0.0;
  std::vector<double> times;             // snapshot times (first entry is 0)
  std::vector<ScalarField2> snapshots;   // phi0 at the snapshot times
  std::vector<double> step_times;        // every accepted step, starting at 0
  std::vector<std::vector<double>> surface_trace;  // phi0(x, 0) per step time
  double dt_used = 0.0;
  long total_steps = 0;
  // smallest value seen anywhere over the run; upwind advection may undershoot
  // slightly below zero, so this is monitored rather than asserted
  double min_value = 0.0;
};

/// Explicit method-of-lines integration of the reduced problem
///   phi_t + V phi_x - w_ef phi_z - Kx phi_xx - d/dz(Kz_ef phi_z) = 0
/// with the dynamic surface condition
///   (w_ef phi + Kz_ef phi_z)|_{z=0} = c_ef phi_t|_{z=0},
/// periodic lateral boundaries and zero diffusive flux through the top.
///
/// The surface condition is enforced through the bottom half cell: with the
/// surface storage s = c_ef phi|_0 absorbed into the z = 0 node balance, the
/// node update divides by (1 + c_ef / cellw). The implied surface flux is
/// c_ef d(phi|_0)/dt, so the discrete quantity
///   sum_j cellw_j phi + c_ef phi|_0
/// telescopes exactly (up to the advective top flux).
inline ReducedTrajectory solve_phi0(const EffectiveCoefficients& eff,
                                    std::span<const double> V, std::span<const double> Kx,
                                    const SpaceGrid& grid, const ScalarField2& phi0_init,
                                    double horizon, std::span<const double> snapshot_times,
                                    const StepControl& control = {}) {
  grid.validate();
  if (phi0_init.nx != grid.nx || phi0_init.nz != grid.nz)
    throw GridMismatchError("solve_phi0: initial field does not match grid");
  if (!phi0_init.all_finite()) throw NumericalError("solve_phi0: non-finite initial data");
  if (static_cast<int>(V.size()) != grid.nz || static_cast<int>(Kx.size()) != grid.nz ||
      static_cast<int>(eff.Kz_ef.size()) != grid.nz)
    throw GridMismatchError("solve_phi0: coefficient arrays do not match z-grid");
  if (!(horizon > 0.0)) throw ConfigError("solve_phi0: horizon must be positive");
  for (std::size_t s = 0; s < snapshot_times.size(); ++s) {
    if (snapshot_times[s] < 0.0 || snapshot_times[s] > horizon * (1.0 + 1e-12))
      throw ConfigError("solve_phi0: snapshot time outside [0, horizon]");
    if (s > 0 && snapshot_times[s] <= snapshot_times[s - 1])
      throw ConfigError("solve_phi0: snapshot times must be strictly increasing");
  }

  const TransportKernel kernel{grid};
  TransportCoeffs coeffs;
  coeffs.V = V.data();
  coeffs.Kx = Kx.data();
  coeffs.Kz = eff.Kz_ef.data();
  coeffs.kz_stride = 1;
  coeffs.w = eff.w_ef;

  double dt = control.dt;
  if (dt <= 0.0) {
    const double rate = kernel.max_rate(coeffs);
    if (!(rate > 0.0)) throw NumericalError("solve_phi0: degenerate CFL rate");
    dt = control.cfl_safety / rate;
  } else {
    const double rate = kernel.max_rate(coeffs);
    if (dt * rate > 1.0)
      throw NumericalError("solve_phi0: requested dt violates the CFL bound (dt * rate = " +
                           std::to_string(dt * rate) + ")");
  }

  // Surface capacity factor: boundary-node rates divide by 1 + c_ef / cellw0.
  const double cap = 1.0 + eff.c_ef / grid.z_cell_width(0);
  if (!(cap > 1e-12)) throw NumericalError("solve_phi0: nonpositive surface capacity");

  ReducedTrajectory traj;
  traj.grid = grid;
  traj.c_ef = eff.c_ef;
  traj.dt_used = dt;
  traj.min_value = *std::min_element(phi0_init.data.begin(), phi0_init.data.end());

  ScalarField2 phi = phi0_init;
  ScalarField2 rhs(grid);
  const int threads = control.threads;

  auto record_trace = [&](double t) {
    traj.step_times.push_back(t);
    std::vector<double> row(static_cast<std::size_t>(grid.nx));
    for (int i = 0; i < grid.nx; ++i) row[i] = phi.at(i, 0);
    traj.surface_trace.push_back(std::move(row));
  };
  auto snapshot = [&](double t) {
    traj.times.push_back(t);
    traj.snapshots.push_back(phi);
  };

  record_trace(0.0);
  std::size_t next_snap = 0;
  if (!snapshot_times.empty() && snapshot_times[0] == 0.0) {
    snapshot(0.0);
    ++next_snap;
  }

  double t = 0.0;
  std::vector<double> targets(snapshot_times.begin() + next_snap, snapshot_times.end());
  if (targets.empty() || targets.back() < horizon) targets.push_back(horizon);

  for (double target : targets) {
    const auto seg = detail::plan_segment(t, target, dt);
    for (long s = 0; s < seg.steps; ++s) {
      parallel_for(static_cast<std::size_t>(grid.nz), threads,
                   [&](std::size_t jb, std::size_t je) {
                     kernel.rhs_rows(phi.data.data(), 1, coeffs, {}, rhs.data.data(),
                                     static_cast<int>(jb), static_cast<int>(je));
                   });
      for (int i = 0; i < grid.nx; ++i) rhs.at(i, 0) /= cap;
      double guard = 0.0;
      for (std::size_t n = 0; n < phi.data.size(); ++n) {
        phi.data[n] += seg.h * rhs.data[n];
        guard = std::max(guard, std::abs(phi.data[n]));
        traj.min_value = std::min(traj.min_value, phi.data[n]);
      }
      if (!(guard < control.blowup_guard))
        throw NumericalError("solve_phi0: blow-up detected (max |phi0| = " +
                             std::to_string(guard) + ")");
      t += seg.h;
      record_trace(t);
      ++traj.total_steps;
    }
    t = seg.t1;
    if (next_snap < snapshot_times.size() &&
        std::abs(snapshot_times[next_snap] - t) <= 1e-9 * std::max(1.0, t)) {
      snapshot(snapshot_times[next_snap]);
      ++next_snap;
    }
  }
  return traj;
}

/// Leading regular terms from a reduced trajectory:
///   u_bar0(x, z, t, p) = h0(p) phi0(x, z, t)
///   v_bar0(x, t, p)    = c(p) h0(p) phi0(x, 0, t)
struct RegularPart {
  std::vector<Field3> u_bar0;
  std::vector<SurfaceField> v_bar0;
};

inline RegularPart reconstruct_regular(const ReducedTrajectory& traj,
                                       const Spectrum& spectrum,
                                       const EffectiveCoefficients& eff) {
  const int np = static_cast<int>(spectrum.size());
  if (static_cast<std::size_t>(np) != eff.c.size())
    throw GridMismatchError("reconstruct_regular: spectrum/effective size mismatch");
  RegularPart out;
  out.u_bar0.reserve(traj.snapshots.size());
  out.v_bar0.reserve(traj.snapshots.size());
  for (const ScalarField2& phi : traj.snapshots) {
    if (phi.nx != traj.grid.nx || phi.nz != traj.grid.nz)
      throw GridMismatchError("reconstruct_regular: snapshot grid mismatch");
    Field3 u(traj.grid.nx, traj.grid.nz, np);
    SurfaceField v(traj.grid.nx, np);
    for (int i = 0; i < traj.grid.nx; ++i) {
      for (int j = 0; j < traj.grid.nz; ++j) {
        const double a = phi.at(i, j);
        auto pv = u.pvec(i, j);
        for (int k = 0; k < np; ++k) pv[k] = spectrum.h0[k] * a;
      }
      const double a0 = phi.at(i, 0);
      for (int k = 0; k < np; ++k) v.at(i, k) = eff.c[k] * spectrum.h0[k] * a0;
    }
    out.u_bar0.push_back(std::move(u));
    out.v_bar0.push_back(std::move(v));
  }
  return out;
}

}  // namespace dustlayer
