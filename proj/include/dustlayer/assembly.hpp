// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dustlayer/boundary_layer.hpp"
#include "dustlayer/effective.hpp"
#include "dustlayer/errors.hpp"
#include "dustlayer/full_solver.hpp"
#include "dustlayer/profiles.hpp"
#include "dustlayer/reduced_solver.hpp"
#include "dustlayer/transport.hpp"

namespace dustlayer {

/// Everything the layer terms need besides the reduced trajectory.
struct LayerData {
  LayerModes modes;
  SurfaceField pi_v_init;
  std::vector<double> alpha;
  std::vector<double> beta;
  double beta_min = 1e-8;
};

/// Leading-order asymptotic approximation u = u_bar0 + Pi_0 u,
/// v = v_bar0 + Pi_0 v, with the regular and layer components retained.
struct CompositeSolution {
  SpaceGrid grid;
  double epsilon = 0.0;
  std::vector<double> times;
  std::vector<Field3> u, u_regular, u_layer;
  std::vector<SurfaceField> v, v_regular, v_layer;
};

inline CompositeSolution compose_asymptotic(const ReducedTrajectory& reduced,
                                            const LayerData& layers,
                                            const Spectrum& spectrum,
                                            const EffectiveCoefficients& eff,
                                            double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("compose_asymptotic: epsilon must be positive");
  if (layers.modes.nx != reduced.grid.nx || layers.modes.nz != reduced.grid.nz)
    throw GridMismatchError("compose_asymptotic: layer grid does not match reduced grid");
  const int np = static_cast<int>(spectrum.size());

  CompositeSolution comp;
  comp.grid = reduced.grid;
  comp.epsilon = epsilon;
  comp.times = reduced.times;

  for (std::size_t s = 0; s < reduced.times.size(); ++s) {
    const double tau = reduced.times[s] / (epsilon * epsilon);
    const ScalarField2& phi = reduced.snapshots[s];

    Field3 u_reg(comp.grid.nx, comp.grid.nz, np);
    SurfaceField v_reg(comp.grid.nx, np);
    for (int i = 0; i < comp.grid.nx; ++i) {
      for (int j = 0; j < comp.grid.nz; ++j) {
        const double a = phi.at(i, j);
        auto pv = u_reg.pvec(i, j);
        for (int k = 0; k < np; ++k) pv[k] = spectrum.h0[k] * a;
      }
      const double a0 = phi.at(i, 0);
      for (int k = 0; k < np; ++k) v_reg.at(i, k) = eff.c[k] * spectrum.h0[k] * a0;
    }

    Field3 u_lay = compute_layer_u(layers.modes, spectrum, tau);
    SurfaceField v_lay = eval_layer_v(layers.modes, spectrum, layers.alpha, layers.beta,
                                      layers.pi_v_init, tau, layers.beta_min);

    Field3 u_tot = u_reg;
    for (std::size_t n = 0; n < u_tot.data.size(); ++n) u_tot.data[n] += u_lay.data[n];
    SurfaceField v_tot = v_reg;
    for (std::size_t n = 0; n < v_tot.data.size(); ++n) v_tot.data[n] += v_lay.data[n];

    comp.u_regular.push_back(std::move(u_reg));
    comp.u_layer.push_back(std::move(u_lay));
    comp.u.push_back(std::move(u_tot));
    comp.v_regular.push_back(std::move(v_reg));
    comp.v_layer.push_back(std::move(v_lay));
    comp.v.push_back(std::move(v_tot));
  }
  return comp;
}

/// Weighted norms of field differences at matched snapshot times.
struct ComparisonRow {
  double t = 0.0;
  double u_l2 = 0.0, u_sup = 0.0;
  double v_l2 = 0.0, v_sup = 0.0;
  double total_l2 = 0.0;
};

namespace detail {

inline void require_times_match(std::span<const double> a, std::span<const double> b,
                                const char* where) {
  if (a.size() != b.size())
    throw GridMismatchError(std::string(where) + ": snapshot counts differ");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > 1e-9 * std::max(1.0, std::abs(a[i])))
      throw GridMismatchError(std::string(where) + ": snapshot times differ");
}

struct NormAccumulator {
  double sum_sq = 0.0;
  double sup = 0.0;
  void add(double v, double weight) {
    sum_sq += weight * v * v;
    sup = std::max(sup, std::abs(v));
  }
  double l2() const { return std::sqrt(sum_sq); }
};

}  // namespace detail

inline std::vector<ComparisonRow> compare_fields(const CompositeSolution& a,
                                                 const FullTrajectory& b,
                                                 const ParticleGrid& pgrid) {
  if (!(a.grid == b.grid)) throw GridMismatchError("compare_fields: space grids differ");
  detail::require_times_match(a.times, b.times, "compare_fields");

  const SpaceGrid& g = a.grid;
  const double dx = g.dx();
  std::vector<ComparisonRow> rows;
  rows.reserve(a.times.size());
  for (std::size_t s = 0; s < a.times.size(); ++s) {
    if (!a.u[s].same_shape(b.u[s]) || !a.v[s].same_shape(b.v[s]))
      throw GridMismatchError("compare_fields: field shapes differ");
    detail::NormAccumulator nu, nv;
    for (int i = 0; i < g.nx; ++i) {
      for (int j = 0; j < g.nz; ++j) {
        const double wj = dx * g.z_cell_width(j);
        for (int k = 0; k < a.u[s].np; ++k)
          nu.add(a.u[s].at(i, j, k) - b.u[s].at(i, j, k), wj * pgrid.weights[k]);
      }
      for (int k = 0; k < a.v[s].np; ++k)
        nv.add(a.v[s].at(i, k) - b.v[s].at(i, k), dx * pgrid.weights[k]);
    }
    ComparisonRow r;
    r.t = a.times[s];
    r.u_l2 = nu.l2();
    r.u_sup = nu.sup;
    r.v_l2 = nv.l2();
    r.v_sup = nv.sup;
    r.total_l2 = std::sqrt(nu.sum_sq + nv.sum_sq);
    rows.push_back(r);
  }
  return rows;
}

/// Discrete defect norms of the three governing relations, evaluated with the
/// solver stencils and centered finite differences in time. Rows are produced
/// for every snapshot that has both time neighbours. The interior transport
/// defect (a) is measured on z-rows j >= 1; the surface rows carry the flux
/// balance defect (b) and the deposition-pickup exchange defect (c).
struct ResidualRow {
  double t = 0.0;
  double a_l2 = 0.0, a_sup = 0.0;
  double b_l2 = 0.0, b_sup = 0.0;
  double c_l2 = 0.0, c_sup = 0.0;
};

inline std::vector<ResidualRow> residual_of(std::span<const double> times,
                                            std::span<const Field3> u,
                                            std::span<const SurfaceField> v,
                                            const SpaceGrid& grid,
                                            const Profiles& profiles,
                                            const SizeOperator& op, double epsilon) {
  if (times.size() != u.size() || times.size() != v.size())
    throw GridMismatchError("residual_of: snapshot counts differ");
  const int np = static_cast<int>(op.size());
  const double dx = grid.dx(), dz = grid.dz();
  const double eps2 = epsilon * epsilon;
  const TransportKernel kernel{grid};

  std::vector<ResidualRow> rows;
  if (times.size() < 3) return rows;

  Field3 rhs(grid.nx, grid.nz, np);
  for (std::size_t s = 1; s + 1 < times.size(); ++s) {
    const double h1 = times[s] - times[s - 1];
    const double h2 = times[s + 1] - times[s];
    if (!(h1 > 0.0) || !(h2 > 0.0))
      throw ConfigError("residual_of: snapshot times must increase");
    const double cm = -h2 / (h1 * (h1 + h2));
    const double c0 = (h2 - h1) / (h1 * h2);
    const double cp = h1 / (h2 * (h1 + h2));

    // Transport stencils applied to the candidate, per p-slice.
    for (int k = 0; k < np; ++k) {
      TransportCoeffs coeffs;
      coeffs.V = profiles.V.data();
      coeffs.Kx = profiles.Kx.data();
      coeffs.Kz = profiles.Kz.data() + k;
      coeffs.kz_stride = static_cast<std::size_t>(np);
      coeffs.w = profiles.w[k];
      kernel.rhs_rows(u[s].data.data() + k, static_cast<std::size_t>(np), coeffs, {},
                      rhs.data.data() + k, 0, grid.nz);
    }

    ResidualRow row;
    row.t = times[s];
    detail::NormAccumulator na, nb, nc;
    std::vector<double> au(static_cast<std::size_t>(np));
    for (int i = 0; i < grid.nx; ++i) {
      for (int j = 0; j < grid.nz; ++j) {
        auto pv = u[s].pvec(i, j);
        for (int r = 0; r < np; ++r) {
          double acc = 0.0;
          for (int c = 0; c < np; ++c) acc += op.matrix(r, c) * pv[c];
          au[r] = acc;
        }
        if (j >= 1) {
          const double wj = dx * grid.z_cell_width(j);
          for (int k = 0; k < np; ++k) {
            const double dudt = cm * u[s - 1].at(i, j, k) + c0 * u[s].at(i, j, k) +
                                cp * u[s + 1].at(i, j, k);
            const double defect = eps2 * (dudt - rhs.at(i, j, k)) - au[k];
            na.add(defect, wj * op.grid.weights[k]);
          }
        }
      }
      for (int k = 0; k < np; ++k) {
        const double dvdt = cm * v[s - 1].at(i, k) + c0 * v[s].at(i, k) +
                            cp * v[s + 1].at(i, k);
        // one-sided second-order vertical derivative at the surface
        const double dudz = (-3.0 * u[s].at(i, 0, k) + 4.0 * u[s].at(i, 1, k) -
                             u[s].at(i, 2, k)) / (2.0 * dz);
        const double flux = profiles.w[k] * u[s].at(i, 0, k) + profiles.kz(0, k) * dudz;
        const double defect_b = flux - dvdt;
        const double defect_c =
            eps2 * dvdt - (profiles.alpha[k] * u[s].at(i, 0, k) -
                           profiles.beta[k] * v[s].at(i, k));
        nb.add(defect_b, dx * op.grid.weights[k]);
        nc.add(defect_c, dx * op.grid.weights[k]);
      }
    }
    row.a_l2 = na.l2();
    row.a_sup = na.sup;
    row.b_l2 = nb.l2();
    row.b_sup = nb.sup;
    row.c_l2 = nc.l2();
    row.c_sup = nc.sup;
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<ResidualRow> residual_of(const CompositeSolution& candidate,
                                            const Profiles& profiles,
                                            const SizeOperator& op, double epsilon) {
  return residual_of(candidate.times, candidate.u, candidate.v, candidate.grid, profiles,
                     op, epsilon);
}

inline std::vector<ResidualRow> residual_of(const FullTrajectory& candidate,
                                            const Profiles& profiles,
                                            const SizeOperator& op) {
  return residual_of(candidate.times, candidate.u, candidate.v, candidate.grid, profiles,
                     op, candidate.epsilon);
}

/// One measured quantity of the epsilon study.
struct ErrorRow {
  double epsilon = 0.0;
  std::string grid;
  double t = 0.0;
  std::string kind;  // error_u | error_v | error_total | residual_interior | ...
  std::string norm;  // l2 | sup
  double value = 0.0;
  double runtime_sec = 0.0;  // wall time of the direct solve backing this row
};

struct FittedOrder {
  std::string kind;
  std::string grid;
  double eps_coarse = 0.0, eps_fine = 0.0;
  double order = 0.0;
};

struct ErrorTable {
  std::vector<ErrorRow> rows;
  std::vector<FittedOrder> orders;
};

/// Full description of an epsilon-convergence experiment. Coefficients and
/// initial data are generators so the study can re-tabulate them on refined
/// grids.
struct ExperimentSpec {
  SpaceGrid grid;
  SizeOperator op;
  std::function<Profiles(const SpaceGrid&)> make_profiles;
  std::function<Field3(const SpaceGrid&, const Spectrum&)> make_u0;
  std::vector<double> epsilons;
  double compare_at = 0.5;
  double fd_delta = 1e-3;
  StepControl reduced_control;
  StepControl full_control;
  bool richardson = true;
  double richardson_threshold = 0.10;
  double tol_zero = 0.0;
  double gap_min = 1e-6;
  double beta_min = 1e-8;
  double projection_tol = 1e-8;
};

struct StudyResult {
  ErrorTable table;
  bool richardson_ok = true;
  double richardson_delta_max = 0.0;
  std::string fit_grid;  // grid whose values back the fitted orders
};

namespace detail {

struct StudyPassResult {
  // per epsilon (same order as the sorted list): values at compare_at
  std::vector<double> err_u, err_v, err_total;
  std::vector<double> res_a, res_b, res_c;
};

inline StudyPassResult convergence_pass(const ExperimentSpec& spec, const SpaceGrid& grid,
                                        const StepControl& reduced_control,
                                        const StepControl& full_control,
                                        std::span<const double> epsilons,
                                        ErrorTable& table) {
  const Profiles profiles = spec.make_profiles(grid);
  const Spectrum spectrum = spectral_decompose(spec.op, spec.tol_zero, spec.gap_min);
  const EffectiveCoefficients eff =
      effective_coefficients(profiles, spectrum, spec.op.grid, spec.beta_min);

  Field3 u0 = spec.make_u0(grid, spectrum);
  SurfaceField v0 = repair_condition2(u0, profiles.alpha, profiles.beta, spec.beta_min);
  InitialDecomposition dec = decompose_initial(u0, spectrum, spec.projection_tol);
  LayerData layers{dec.modes,
                   surface_layer_initial(v0, dec.phi0_init, eff.c, spectrum),
                   profiles.alpha, profiles.beta, spec.beta_min};

  // One snapshot list serves every epsilon: the comparison triplet plus each
  // epsilon's in-layer time.
  std::vector<double> snaps{spec.compare_at - spec.fd_delta, spec.compare_at,
                            spec.compare_at + spec.fd_delta};
  for (double eps : epsilons) snaps.push_back(eps * eps);
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              snaps.end());
  const double horizon = snaps.back();

  const ReducedTrajectory reduced = solve_phi0(eff, profiles.V, profiles.Kx, grid,
                                               dec.phi0_init, horizon, snaps,
                                               reduced_control);

  StudyPassResult out;
  const std::string gname = grid.describe();
  for (double eps : epsilons) {
    const auto t0 = std::chrono::steady_clock::now();
    const FullTrajectory direct = solve_full(profiles, spec.op, eps, u0, v0, grid,
                                             horizon, snaps, full_control);
    const double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const CompositeSolution comp = compose_asymptotic(reduced, layers, spectrum, eff, eps);
    const auto cmp = compare_fields(comp, direct, spec.op.grid);
    const auto res = residual_of(comp, profiles, spec.op, eps);

    auto push = [&](double t, const std::string& kind, const std::string& norm,
                    double value) {
      table.rows.push_back(ErrorRow{eps, gname, t, kind, norm, value, runtime});
    };

    // error rows at every snapshot; the study values are read at compare_at
    for (const auto& r : cmp) {
      push(r.t, "error_u", "l2", r.u_l2);
      push(r.t, "error_u", "sup", r.u_sup);
      push(r.t, "error_v", "l2", r.v_l2);
      push(r.t, "error_v", "sup", r.v_sup);
      push(r.t, "error_total", "l2", r.total_l2);
      if (std::abs(r.t - spec.compare_at) < 1e-9) {
        out.err_u.push_back(r.u_l2);
        out.err_v.push_back(r.v_l2);
        out.err_total.push_back(r.total_l2);
      }
    }
    for (const auto& r : res) {
      push(r.t, "residual_interior", "l2", r.a_l2);
      push(r.t, "residual_interior", "sup", r.a_sup);
      push(r.t, "residual_flux", "l2", r.b_l2);
      push(r.t, "residual_flux", "sup", r.b_sup);
      push(r.t, "residual_exchange", "l2", r.c_l2);
      push(r.t, "residual_exchange", "sup", r.c_sup);
      if (std::abs(r.t - spec.compare_at) < 1e-9) {
        out.res_a.push_back(r.a_l2);
        out.res_b.push_back(r.b_l2);
        out.res_c.push_back(r.c_l2);
      }
    }
  }
  return out;
}

inline void fit_orders(const StudyPassResult& pass, std::span<const double> epsilons,
                       const std::string& gname, ErrorTable& table) {
  auto fit = [&](const std::vector<double>& vals, const std::string& kind) {
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      const double ec = vals[i], ef = vals[i + 1];
      const double q = std::log(ec / ef) / std::log(epsilons[i] / epsilons[i + 1]);
      table.orders.push_back(FittedOrder{kind, gname, epsilons[i], epsilons[i + 1], q});
    }
  };
  fit(pass.err_u, "error_u");
  fit(pass.err_v, "error_v");
  fit(pass.err_total, "error_total");
  fit(pass.res_a, "residual_interior");
  fit(pass.res_b, "residual_flux");
  fit(pass.res_c, "residual_exchange");
}

}  // namespace detail

/// Runs the composite-vs-direct experiment for each epsilon (processed in
/// descending order), optionally repeats it once on a refined grid
/// (Richardson control), and fits the observed order from consecutive pairs.
inline StudyResult convergence_study(const ExperimentSpec& spec) {
  if (spec.epsilons.empty()) throw ConfigError("convergence_study: no epsilon values");
  std::vector<double> eps = spec.epsilons;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
  for (double e : eps)
    if (!(e > 0.0) || e > 1.0)
      throw ConfigError("convergence_study: epsilon values must lie in (0, 1]");
  if (!(spec.compare_at > spec.fd_delta))
    throw ConfigError("convergence_study: compare_at must exceed fd_delta");

  StudyResult result;
  const auto coarse =
      detail::convergence_pass(spec, spec.grid, spec.reduced_control, spec.full_control,
                               eps, result.table);
  result.fit_grid = spec.grid.describe();

  if (spec.richardson) {
    const SpaceGrid fine = spec.grid.refined();
    StepControl rc = spec.reduced_control;
    StepControl fc = spec.full_control;
    if (rc.dt > 0.0) rc.dt *= 0.25;
    if (fc.dt > 0.0) fc.dt *= 0.25;
    const auto refined =
        detail::convergence_pass(spec, fine, rc, fc, eps, result.table);
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const double delta = std::abs(coarse.err_u[i] - refined.err_u[i]) /
                           std::max(refined.err_u[i], 1e-300);
      result.richardson_delta_max = std::max(result.richardson_delta_max, delta);
      result.table.rows.push_back(ErrorRow{eps[i], fine.describe() + "/richardson",
                                           spec.compare_at, "richardson_delta", "l2",
                                           delta, 0.0});
    }
    result.richardson_ok = result.richardson_delta_max <= spec.richardson_threshold;
    detail::fit_orders(refined, eps, fine.describe(), result.table);
    result.fit_grid = fine.describe();
  } else {
    detail::fit_orders(coarse, eps, spec.grid.describe(), result.table);
  }
  return result;
}

}  // namespace dustlayer
