// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "dustlayer/effective.hpp"
#include "dustlayer/reduced_solver.hpp"
#include "dustlayer/size_operator.hpp"
#include "dustlayer/space_grid.hpp"
#include "dustlayer/spectrum.hpp"

using namespace dustlayer;

namespace {

EffectiveCoefficients const_coeffs(int nz, double w_ef, double kz, double c_ef) {
  EffectiveCoefficients eff;
  eff.w_ef = w_ef;
  eff.c_ef = c_ef;
  eff.Kz_ef.assign(nz, kz);
  return eff;
}

/// Neumann-compatible separable mode cos(kx x) cos(kz z).
ScalarField2 separable_mode(const SpaceGrid& g, int mx, int nzmode) {
  ScalarField2 f(g);
  const double kx = 2.0 * std::numbers::pi * mx / g.x_length;
  const double kz = std::numbers::pi * nzmode / g.z_top;
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.nz; ++j) f.at(i, j) = std::cos(kx * g.x(i)) * std::cos(kz * g.z(j));
  return f;
}

double l2_error_vs(const ScalarField2& a, const ScalarField2& b, const SpaceGrid& g) {
  double acc = 0.0;
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.nz; ++j) {
      const double d = a.at(i, j) - b.at(i, j);
      acc += g.dx() * g.z_cell_width(j) * d * d;
    }
  return std::sqrt(acc);
}

double surrogate_mass(const ScalarField2& phi, const SpaceGrid& g, double c_ef) {
  double acc = 0.0;
  for (int i = 0; i < g.nx; ++i) {
    for (int j = 0; j < g.nz; ++j) acc += g.dx() * g.z_cell_width(j) * phi.at(i, j);
    acc += g.dx() * c_ef * phi.at(i, 0);
  }
  return acc;
}

}  // namespace

TEST_CASE("zero initial data stays exactly zero") {
  SpaceGrid g{16, 9, 1.0, 1.0};
  const auto eff = const_coeffs(g.nz, 0.1, 0.05, 0.2);
  std::vector<double> V(g.nz, 0.3), Kx(g.nz, 0.01);
  const std::vector<double> snaps{0.25, 0.5};
  const auto traj = solve_phi0(eff, V, Kx, g, ScalarField2(g), 0.5, snaps);
  REQUIRE(traj.snapshots.size() == 2);
  for (const auto& s : traj.snapshots) REQUIRE(s.max_abs() == 0.0);
}

TEST_CASE("separable heat-equation mode decays at the analytic rate") {
  SpaceGrid g{48, 33, 1.0, 1.0};
  const double kdiff = 0.05;
  const auto eff = const_coeffs(g.nz, 0.0, kdiff, 0.0);
  std::vector<double> V(g.nz, 0.0), Kx(g.nz, kdiff);

  const int mx = 1, mz = 1;
  const double kx = 2.0 * std::numbers::pi * mx, kz = std::numbers::pi * mz;
  const double rate = kdiff * (kx * kx + kz * kz);
  const double T = 0.2;

  const ScalarField2 phi0 = separable_mode(g, mx, mz);
  const std::vector<double> snaps{T};
  const auto traj = solve_phi0(eff, V, Kx, g, phi0, T, snaps);

  ScalarField2 exact = phi0;
  for (double& v : exact.data) v *= std::exp(-rate * T);
  const double err = l2_error_vs(traj.snapshots[0], exact, g);
  const double ref = l2_error_vs(phi0, ScalarField2(g), g);
  REQUIRE(err / ref < 0.01);
}

TEST_CASE("halving the grid spacing reduces the oracle error by the scheme order") {
  const double kdiff = 0.05, T = 0.1;
  StepControl control;
  control.dt = 1e-4;  // fixed so the comparison isolates the spatial error

  auto run_error = [&](int nx, int nz) {
    SpaceGrid g{nx, nz, 1.0, 1.0};
    const auto eff = const_coeffs(g.nz, 0.0, kdiff, 0.0);
    std::vector<double> V(g.nz, 0.0), Kx(g.nz, kdiff);
    const ScalarField2 phi0 = separable_mode(g, 1, 1);
    const std::vector<double> snaps{T};
    const auto traj = solve_phi0(eff, V, Kx, g, phi0, T, snaps, control);
    const double kx = 2.0 * std::numbers::pi, kz = std::numbers::pi;
    ScalarField2 exact = phi0;
    for (double& v : exact.data) v *= std::exp(-kdiff * (kx * kx + kz * kz) * T);
    return l2_error_vs(traj.snapshots[0], exact, g);
  };

  const double coarse = run_error(24, 17);
  const double fine = run_error(48, 33);
  REQUIRE(coarse / fine > 3.0);
  REQUIRE(coarse / fine < 5.0);
}

TEST_CASE("column mass plus surface storage is conserved") {
  SpaceGrid g{32, 25, 1.0, 1.0};
  EffectiveCoefficients eff;
  eff.w_ef = 0.05;
  eff.c_ef = 0.4;
  eff.Kz_ef.resize(g.nz);
  for (int j = 0; j < g.nz; ++j) eff.Kz_ef[j] = 0.02 + 0.03 * g.z(j);
  std::vector<double> V(g.nz), Kx(g.nz, 0.01);
  for (int j = 0; j < g.nz; ++j) V[j] = 0.2 + 0.4 * g.z(j);

  ScalarField2 phi0(g);
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.nz; ++j) {
      const double zz = (g.z(j) - 0.3) / 0.12;
      phi0.at(i, j) = (1.0 + 0.4 * std::cos(2.0 * std::numbers::pi * g.x(i))) *
                      std::exp(-zz * zz);
    }

  const double T = 0.5;
  const std::vector<double> snaps{0.1, 0.3, T};
  const auto traj = solve_phi0(eff, V, Kx, g, phi0, T, snaps);

  const double q0 = surrogate_mass(phi0, g, eff.c_ef);
  for (const auto& s : traj.snapshots) {
    const double q = surrogate_mass(s, g, eff.c_ef);
    REQUIRE(std::abs(q - q0) / std::abs(q0) < 1e-6 * T);
  }
}

TEST_CASE("step control guards") {
  SpaceGrid g{8, 5, 1.0, 1.0};
  const auto eff = const_coeffs(g.nz, 0.0, 0.05, 0.0);
  std::vector<double> V(g.nz, 0.0), Kx(g.nz, 0.05);
  StepControl control;
  control.dt = 10.0;  // far above the CFL bound
  const std::vector<double> snaps{0.1};
  REQUIRE_THROWS_AS(solve_phi0(eff, V, Kx, g, separable_mode(g, 1, 1), 0.1, snaps, control),
                    NumericalError);

  const std::vector<double> bad{0.2, 0.1};
  REQUIRE_THROWS_AS(solve_phi0(eff, V, Kx, g, separable_mode(g, 1, 1), 0.3, bad),
                    ConfigError);
}

TEST_CASE("regular-part reconstruction is the stated tensor product") {
  const SizeOperator op = builtin_two_bin(1.0, 2.0);
  const Spectrum sp = spectral_decompose(op);
  SpaceGrid g{4, 3, 1.0, 1.0};

  EffectiveCoefficients eff;
  eff.c = {2.0, 5.0};
  eff.Kz_ef.assign(g.nz, 0.1);

  ReducedTrajectory traj;
  traj.grid = g;
  traj.times = {0.0};
  ScalarField2 ones(g);
  for (double& v : ones.data) v = 1.0;
  traj.snapshots = {ones};

  const RegularPart reg = reconstruct_regular(traj, sp, eff);
  for (int i = 0; i < g.nx; ++i) {
    for (int j = 0; j < g.nz; ++j) {
      REQUIRE(reg.u_bar0[0].at(i, j, 0) == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
      REQUIRE(reg.u_bar0[0].at(i, j, 1) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    REQUIRE(reg.v_bar0[0].at(i, 0) == Catch::Approx(2.0 * 2.0 / 3.0).epsilon(1e-12));
    REQUIRE(reg.v_bar0[0].at(i, 1) == Catch::Approx(5.0 / 3.0).epsilon(1e-12));
  }

  // projection identity: pairing the reconstruction against h0* returns phi0
  SECTION("pairing against the adjoint null mode recovers the amplitude") {
    ScalarField2 wavy(g);
    for (int i = 0; i < g.nx; ++i)
      for (int j = 0; j < g.nz; ++j) wavy.at(i, j) = 0.3 + i * 0.1 - j * 0.07;
    traj.snapshots = {wavy};
    const RegularPart r2 = reconstruct_regular(traj, sp, eff);
    for (int i = 0; i < g.nx; ++i)
      for (int j = 0; j < g.nz; ++j) {
        const double paired = inner_product(r2.u_bar0[0].pvec(i, j),
                                            std::span<const double>(sp.h0_adj.data(), 2),
                                            op.grid);
        REQUIRE(paired == Catch::Approx(wavy.at(i, j)).margin(1e-12));
      }
  }
}
