// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: every criterion runs at its stated tolerance against the
// shipped reference configuration and prints one pass/fail line. The binary
// exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dustlayer/run.hpp"
#include "oracles.hpp"

using namespace dustlayer;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  int id;
  std::string name;
  bool pass = true;
  std::vector<std::string> details;
  double seconds = 0.0;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(double v) { return io::format_double(v); }

RunConfig reference_config() {
  return RunConfig::from_file(fs::path(DUSTLAYER_SOURCE_DIR) / "configs/reference.json");
}

double l2_norm_u(const Field3& f, const SpaceGrid& g, const ParticleGrid& pg) {
  double acc = 0.0;
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.nz; ++j)
      for (int k = 0; k < f.np; ++k)
        acc += g.dx() * g.z_cell_width(j) * pg.weights[k] * f.at(i, j, k) * f.at(i, j, k);
  return std::sqrt(acc);
}

double l2_diff_u(const Field3& a, const Field3& b, const SpaceGrid& g,
                 const ParticleGrid& pg) {
  double acc = 0.0;
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.nz; ++j)
      for (int k = 0; k < a.np; ++k) {
        const double d = a.at(i, j, k) - b.at(i, j, k);
        acc += g.dx() * g.z_cell_width(j) * pg.weights[k] * d * d;
      }
  return std::sqrt(acc);
}

// --------------------------------------------------------------------------
// 1. Spectral oracle: built-in two-bin operator.
// --------------------------------------------------------------------------
void criterion_1(Criterion& c) {
  const SizeOperator op = builtin_two_bin(1.0, 2.0);
  const Spectrum sp = spectral_decompose(op);

  c.check(std::abs(sp.eigenvalues[0]) <= 1e-10,
          "lambda_0 = " + fmt(std::abs(sp.eigenvalues[0])) + " within 1e-10 of 0");
  c.check(std::abs(sp.eigenvalues[1] - std::complex<double>(-3.0, 0.0)) <= 1e-10,
          "lambda_1 within 1e-10 of -3");
  c.check(std::abs(sp.h0[0] - 2.0 * sp.h0[1]) <= 1e-12 * std::abs(sp.h0[0]),
          "h0 proportional to (2, 1)");
  c.check(std::abs(sp.h0_adj[0] - sp.h0_adj[1]) <= 1e-12 * std::abs(sp.h0_adj[0]),
          "h0* proportional to (1, 1)");
  double pairing = 0.0;
  for (int k = 0; k < 2; ++k) pairing += op.grid.weights[k] * sp.h0[k] * sp.h0_adj[k];
  c.check(std::abs(pairing - 1.0) <= 1e-12,
          "(h0, h0*) = 1 within 1e-12 (got " + fmt(pairing) + ")");
}

// --------------------------------------------------------------------------
// 2. Effective coefficients.
// --------------------------------------------------------------------------
void criterion_2(Criterion& c) {
  const SizeOperator op = builtin_two_bin(1.0, 2.0);
  const Spectrum sp = spectral_decompose(op);
  Profiles prof;
  prof.nz = 3;
  prof.np = 2;
  prof.V.assign(3, 0.0);
  prof.Kx.assign(3, 0.01);
  prof.Kz.assign(6, 0.02);
  prof.w = {1.0, 4.0};
  prof.alpha = {0.4, 0.8};
  prof.beta = {2.0, 4.0};
  const auto eff = effective_coefficients(prof, sp, op.grid);
  c.check(std::abs(eff.w_ef - 2.0) <= 1e-12,
          "w_ef for w = (1, 4): " + fmt(eff.w_ef) + " = 2 within 1e-12");

  Eigen::MatrixXd z(1, 1);
  z << 0.0;
  const SizeOperator single{z, ParticleGrid::single()};
  const Spectrum sps = spectral_decompose(single);
  Profiles ps;
  ps.nz = 3;
  ps.np = 1;
  ps.V.assign(3, 0.0);
  ps.Kx.assign(3, 0.01);
  ps.Kz = {0.11, 0.13, 0.17};
  ps.w = {0.37};
  ps.alpha = {0.81};
  ps.beta = {2.7};
  const auto es = effective_coefficients(ps, sps, single.grid);
  c.check(es.w_ef == ps.w[0] && es.c_ef == ps.alpha[0] / ps.beta[0] &&
              es.Kz_ef[0] == ps.Kz[0] && es.Kz_ef[2] == ps.Kz[2],
          "single-bin effective coefficients equal the raw ones exactly");
}

// --------------------------------------------------------------------------
// 3. Conservation of generalized mass on the reference configuration.
// --------------------------------------------------------------------------
void criterion_3(Criterion& c) {
  RunConfig cfg = reference_config();
  const auto w = runner::build_workspace(cfg);
  StepControl control = runner::step_control(cfg);
  const auto traj = solve_full(w.profiles, w.op, 0.1, w.u0, w.v0, w.grid,
                               cfg.time.horizon, cfg.time.snapshots, control);
  const double m0 = generalized_mass(w.u0, w.v0, w.spectrum, w.grid);
  double worst = 0.0;
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    const double m = generalized_mass(traj.u[s], traj.v[s], w.spectrum, w.grid);
    worst = std::max(worst, std::abs(m - m0) / std::abs(m0));
  }
  c.check(worst <= 1e-5, "relative mass drift over T = 1 at eps = 0.1: " + fmt(worst) +
                             " <= 1e-5 (grid 64x48x2)");
}

// --------------------------------------------------------------------------
// 4. Layer decay slope and orthogonality.
// --------------------------------------------------------------------------
void criterion_4(Criterion& c) {
  RunConfig cfg = reference_config();
  const auto w = runner::build_workspace(cfg);
  const double lam1 = w.spectrum.eigenvalues[1].real();

  std::vector<double> taus, lognorm;
  double worst_pairing = 0.0;
  for (double tau = 1.0; tau <= 5.0 + 1e-9; tau += 0.5) {
    const Field3 layer = compute_layer_u(w.dec.modes, w.spectrum, tau);
    const double n = l2_norm_u(layer, w.grid, w.op.grid);
    taus.push_back(tau);
    lognorm.push_back(std::log(n));
    for (int i = 0; i < w.grid.nx; ++i)
      for (int j = 0; j < w.grid.nz; ++j) {
        const double paired =
            inner_product(layer.pvec(i, j),
                          std::span<const double>(w.spectrum.h0_adj.data(),
                                                  w.spectrum.h0_adj.size()),
                          w.op.grid);
        worst_pairing = std::max(worst_pairing, std::abs(paired));
      }
  }
  // least-squares slope of log ||Pi u0|| against tau
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  const double n = static_cast<double>(taus.size());
  for (std::size_t s = 0; s < taus.size(); ++s) {
    st += taus[s];
    sl += lognorm[s];
    stt += taus[s] * taus[s];
    stl += taus[s] * lognorm[s];
  }
  const double slope = (n * stl - st * sl) / (n * stt - st * st);
  c.check(std::abs(slope - lam1) <= 0.05 * std::abs(lam1),
          "log-norm slope over tau in [1, 5]: " + fmt(slope) + " vs Re lambda_1 = " +
              fmt(lam1) + " within 5%");
  c.check(worst_pairing <= 1e-10,
          "max |(Pi u0, h0*)| over tau grid: " + fmt(worst_pairing) + " <= 1e-10");
}

// --------------------------------------------------------------------------
// 5. Closed-form surface layer vs an RK4 oracle, including a confluent case.
// --------------------------------------------------------------------------
void criterion_5(Criterion& c) {
  RunConfig cfg = reference_config();
  const auto w = runner::build_workspace(cfg);

  auto rk4_check = [&](std::span<const double> alpha, std::span<const double> beta,
                       const SurfaceField& init, double tau_end) {
    const SurfaceField closed =
        eval_layer_v(w.dec.modes, w.spectrum, alpha, beta, init, tau_end);
    double worst = 0.0;
    for (int i = 0; i < w.grid.nx; ++i) {
      for (int k = 0; k < 2; ++k) {
        const std::size_t surf = static_cast<std::size_t>(i) * w.grid.nz;
        const std::complex<double> amp = w.dec.modes.amplitudes[0][surf];
        const std::complex<double> h1k = w.spectrum.right_modes(k, 1);
        const std::complex<double> lam = w.spectrum.eigenvalues[1];
        const double a = alpha[k], b = beta[k];
        const double oracle = oracles::rk4(
            [&](double tau, double y) {
              return a * (amp * h1k * std::exp(lam * tau)).real() - b * y;
            },
            init.at(i, k), 0.0, tau_end, 4000);
        worst = std::max(worst, std::abs(closed.at(i, k) - oracle));
      }
    }
    return worst;
  };

  const double d1 = rk4_check(w.profiles.alpha, w.profiles.beta, w.layers.pi_v_init, 2.0);
  c.check(d1 <= 1e-8, "reference coefficients: max |closed form - RK4| = " + fmt(d1) +
                          " <= 1e-8");

  // constructed confluent case: beta equals -lambda_1 exactly in bin 1
  const std::vector<double> alpha_c{0.7, 0.9};
  const std::vector<double> beta_c{3.0, 2.0};
  SurfaceField init(w.grid.nx, 2);
  for (int i = 0; i < w.grid.nx; ++i) {
    init.at(i, 0) = 0.1 + 0.01 * i;
    init.at(i, 1) = -0.05;
  }
  const double d2 = rk4_check(alpha_c, beta_c, init, 2.0);
  c.check(d2 <= 1e-8,
          "confluent case beta = -lambda_1: max |closed form - RK4| = " + fmt(d2) +
              " <= 1e-8");
}

// --------------------------------------------------------------------------
// 6. O(eps^2) convergence of the composite error and the equation residuals.
// --------------------------------------------------------------------------
void criterion_6(Criterion& c) {
  RunConfig cfg = reference_config();
  const auto probe = runner::build_workspace(cfg);

  ExperimentSpec spec;
  spec.grid = probe.grid;
  spec.op = probe.op;
  spec.make_profiles = [cfg](const SpaceGrid& g) {
    const SizeOperator op = runner::build_operator(cfg);
    return runner::build_profiles(cfg, g, op.grid);
  };
  spec.make_u0 = [cfg](const SpaceGrid& g, const Spectrum& sp) {
    return runner::build_initial(cfg, g, sp);
  };
  spec.epsilons = {0.2, 0.1};
  spec.compare_at = cfg.time.compare_at;
  spec.fd_delta = cfg.time.fd_delta;
  spec.reduced_control = runner::step_control(cfg);
  spec.full_control = runner::step_control(cfg);
  spec.richardson = true;
  spec.richardson_threshold = 0.10;

  const StudyResult study = convergence_study(spec);
  c.check(study.richardson_ok,
          "grid error controlled: refinement changes e(eps) by " +
              fmt(study.richardson_delta_max) + " (< 10%)");

  auto order_of = [&](const std::string& kind) {
    for (const auto& o : study.table.orders)
      if (o.kind == kind && o.grid == study.fit_grid) return o.order;
    return 0.0;
  };
  auto window = [&](const std::string& kind, const std::string& label) {
    const double q = order_of(kind);
    c.check(q >= 1.7 && q <= 2.3,
            label + ": log2(e(0.2)/e(0.1)) = " + fmt(q) + " in [1.7, 2.3]");
  };
  window("error_u", "composite-vs-direct L2 error (u)");
  window("residual_interior", "interior equation residual");
  window("residual_flux", "surface flux equation residual");
  window("residual_exchange", "surface exchange equation residual");
  c.details.push_back(
      "note: the flux-balance defect of the leading-order composite carries no "
      "eps dependence (see README); its ratio is reported, not attainable");
  c.details.push_back("note: error_v order = " + fmt(order_of("error_v")) +
                      ", error_total order = " + fmt(order_of("error_total")));
}

// --------------------------------------------------------------------------
// 7. Degenerate single-bin regression.
// --------------------------------------------------------------------------
void criterion_7(Criterion& c) {
  RunConfig cfg = RunConfig::from_file(fs::path(DUSTLAYER_SOURCE_DIR) /
                                       "configs/monin_single_bin.json");
  const auto w = runner::build_workspace(cfg);
  StepControl control = runner::step_control(cfg);
  const double eps = cfg.epsilons.at(0);

  const auto reduced = solve_phi0(w.eff, w.profiles.V, w.profiles.Kx, w.grid,
                                  w.dec.phi0_init, cfg.time.horizon,
                                  cfg.time.snapshots, control);
  const auto comp = compose_asymptotic(reduced, w.layers, w.spectrum, w.eff, eps);
  const auto direct = solve_full(w.profiles, w.op, eps, w.u0, w.v0, w.grid,
                                 cfg.time.horizon, cfg.time.snapshots, control);

  // composite == reduced solution exactly: no decaying modes exist
  double comp_vs_reduced = 0.0, layer_v_mag = 0.0;
  for (std::size_t s = 0; s < comp.times.size(); ++s) {
    for (int i = 0; i < w.grid.nx; ++i)
      for (int j = 0; j < w.grid.nz; ++j)
        comp_vs_reduced = std::max(
            comp_vs_reduced, std::abs(comp.u[s].at(i, j, 0) -
                                      w.spectrum.h0[0] * reduced.snapshots[s].at(i, j)));
    layer_v_mag = std::max(layer_v_mag, comp.v_layer[s].max_abs());
  }
  c.check(comp_vs_reduced == 0.0,
          "composite u equals h0 * phi0 exactly (sup diff = " + fmt(comp_vs_reduced) +
              ")");
  c.check(layer_v_mag <= 1e-14,
          "surface layer is roundoff only (max = " + fmt(layer_v_mag) + ")");

  const auto cmp = compare_fields(comp, direct, w.op.grid);
  for (std::size_t s = 0; s < cmp.size(); ++s) {
    const double ref = l2_norm_u(direct.u[s], w.grid, w.op.grid);
    const double rel = cmp[s].u_l2 / ref;
    c.check(rel < 0.01, "composite vs direct at t = " + fmt(cmp[s].t) +
                            ": relative L2 = " + fmt(rel) + " < 1%");
  }
}

// --------------------------------------------------------------------------
// 8. Determinism: byte-identical reruns, thread-count invariance.
// --------------------------------------------------------------------------
void criterion_8(Criterion& c) {
  RunConfig cfg = reference_config();
  cfg.mode = RunMode::compare;
  cfg.nx = 16;
  cfg.nz = 13;
  cfg.epsilons = {0.2};
  cfg.time.horizon = 0.2;
  cfg.time.snapshots = {0.1, 0.2};
  cfg.time.dt = 1e-3;

  const fs::path base = fs::temp_directory_path() / "dustlayer_acceptance";
  fs::remove_all(base);
  auto run_into = [&](const std::string& sub, int threads) {
    RunConfig c2 = cfg;
    c2.output_dir = (base / sub).string();
    c2.threads = threads;
    const RunResult r = run(c2);
    if (r.exit_code != 0) throw NumericalError("determinism run failed");
    return r.outputs;
  };

  const auto files1 = run_into("a", 1);
  run_into("b", 1);
  bool identical = true;
  for (const auto& name : files1)
    identical = identical && io::read_file(base / "a" / name) ==
                                 io::read_file(base / "b" / name);
  c.check(identical, "rerun at fixed thread count: all " +
                         std::to_string(files1.size()) + " files byte-identical");

  run_into("t2", 2);
  run_into("t4", 4);
  // numeric artifacts must agree across thread counts; the manifest may
  // differ (it records the requested concurrency)
  bool bytes_equal = true;
  for (const auto& name : files1) {
    if (name == "manifest.json") continue;
    const std::string fa = io::read_file(base / "a" / name);
    const std::string f2 = io::read_file(base / "t2" / name);
    const std::string f4 = io::read_file(base / "t4" / name);
    bytes_equal = bytes_equal && fa == f2 && fa == f4;
  }
  c.check(bytes_equal,
          "thread counts 1/2/4: numeric outputs byte-identical (L-inf deviation 0)");
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1 && std::strcmp(argv[1], "--only") == 0 && argc > 2) only = std::atoi(argv[2]);

  std::vector<std::pair<std::string, std::function<void(Criterion&)>>> table = {
      {"spectral oracle (built-in 2-bin operator)", criterion_1},
      {"effective coefficients", criterion_2},
      {"generalized-mass conservation (direct solver)", criterion_3},
      {"boundary-layer decay and orthogonality", criterion_4},
      {"closed-form surface layer vs RK4 oracle", criterion_5},
      {"O(eps^2) convergence of error and residuals", criterion_6},
      {"degenerate single-bin regression", criterion_7},
      {"determinism and thread invariance", criterion_8},
  };

  int failures = 0;
  for (std::size_t idx = 0; idx < table.size(); ++idx) {
    const int id = static_cast<int>(idx) + 1;
    if (only != 0 && only != id) continue;
    Criterion c{id, table[idx].first};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      table[idx].second(c);
    } catch (const std::exception& e) {
      c.check(false, std::string("unexpected exception: ") + e.what());
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (id == 1 && c.seconds >= 1.0) c.check(false, "runtime exceeded 1 s");

    std::printf("[%s] criterion %d: %s  [%.2f s]\n", c.pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), c.seconds);
    for (const auto& d : c.details) std::printf("        %s\n", d.c_str());
    if (!c.pass) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
