// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dustlayer/errors.hpp"
#include "dustlayer/space_grid.hpp"
#include "dustlayer/spectrum.hpp"

namespace dustlayer {

/// Per-mode amplitude fields u_i^0(x, z) of the decaying eigenmodes (i >= 1),
/// obtained by decomposing the initial data in the eigenmode basis. Complex
/// amplitudes appear in conjugate pairs when the spectrum does.
struct LayerModes {
  int nx = 0, nz = 0;
  std::vector<std::complex<double>> lambdas;                  // i >= 1
  std::vector<std::vector<std::complex<double>>> amplitudes;  // per mode, (i * nz + j)

  std::size_t mode_count() const { return lambdas.size(); }
};

/// Initial data split into the equilibrium amplitude (which seeds phi0) and
/// the decaying mode amplitudes (which seed the boundary layer).
struct InitialDecomposition {
  ScalarField2 phi0_init;  // u_0^0(x, z)
  LayerModes modes;
};

inline InitialDecomposition decompose_initial(const Field3& u0, const Spectrum& spectrum,
                                              double tol = 1e-8) {
  if (u0.np != static_cast<int>(spectrum.size()))
    throw GridMismatchError("decompose_initial: field p-count does not match spectrum");
  if (!u0.all_finite()) throw NumericalError("decompose_initial: non-finite initial data");

  InitialDecomposition dec;
  dec.phi0_init = ScalarField2(u0.nx, u0.nz);
  dec.modes.nx = u0.nx;
  dec.modes.nz = u0.nz;
  const std::size_t nm = static_cast<std::size_t>(spectrum.layer_mode_count());
  dec.modes.lambdas.resize(nm);
  dec.modes.amplitudes.assign(nm, std::vector<std::complex<double>>(
                                      static_cast<std::size_t>(u0.nx) * u0.nz));
  for (std::size_t m = 0; m < nm; ++m) dec.modes.lambdas[m] = spectrum.eigenvalues[m + 1];

  for (int i = 0; i < u0.nx; ++i) {
    for (int j = 0; j < u0.nz; ++j) {
      const auto c = project_onto_modes(u0.pvec(i, j), spectrum, tol);
      const std::size_t cell = static_cast<std::size_t>(i) * u0.nz + j;
      dec.phi0_init.at(i, j) = c[0].real();
      for (std::size_t m = 0; m < nm; ++m) dec.modes.amplitudes[m][cell] = c[m + 1];
    }
  }
  return dec;
}

namespace detail {

/// exp(x) - 1 for complex x, stable near zero.
inline std::complex<double> expm1c(const std::complex<double>& x) {
  if (std::abs(x) < 1e-5) {
    // x (1 + x/2 (1 + x/3 (1 + x/4)))
    return x * (1.0 + x / 2.0 * (1.0 + x / 3.0 * (1.0 + x / 4.0)));
  }
  return std::exp(x) - 1.0;
}

inline void check_imag_residual(double max_imag, double scale, const char* where) {
  if (max_imag > 1e-10 * std::max(1.0, scale))
    throw NumericalError(std::string(where) +
                         ": conjugate-pair sum left an imaginary residue (" +
                         std::to_string(max_imag) + ")");
}

}  // namespace detail

/// Leading boundary-layer function in the atmosphere at fast time tau:
///   Pi_0 u(x, z, tau, p) = Re sum_{i>=1} u_i^0(x, z) h_i(p) exp(lambda_i tau).
inline Field3 compute_layer_u(const LayerModes& modes, const Spectrum& spectrum,
                              double tau) {
  if (tau < 0.0) throw NumericalError("compute_layer_u: negative tau");
  if (modes.mode_count() != static_cast<std::size_t>(spectrum.layer_mode_count()))
    throw GridMismatchError("compute_layer_u: mode count does not match spectrum");

  const int np = static_cast<int>(spectrum.size());
  Field3 out(modes.nx, modes.nz, np);
  if (modes.mode_count() == 0) return out;

  std::vector<std::complex<double>> decay(modes.mode_count());
  for (std::size_t m = 0; m < modes.mode_count(); ++m)
    decay[m] = std::exp(modes.lambdas[m] * tau);

  double max_imag = 0.0, scale = 0.0;
  for (int i = 0; i < modes.nx; ++i) {
    for (int j = 0; j < modes.nz; ++j) {
      const std::size_t cell = static_cast<std::size_t>(i) * modes.nz + j;
      auto pv = out.pvec(i, j);
      for (int k = 0; k < np; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t m = 0; m < modes.mode_count(); ++m)
          acc += modes.amplitudes[m][cell] * spectrum.right_modes(k, m + 1) * decay[m];
        pv[k] = acc.real();
        max_imag = std::max(max_imag, std::abs(acc.imag()));
        scale = std::max(scale, std::abs(acc.real()));
      }
    }
  }
  detail::check_imag_residual(max_imag, scale, "compute_layer_u");
  return out;
}

/// Layer snapshots on the surface at requested fast times.
struct SurfaceLayer {
  std::vector<double> taus;
  std::vector<SurfaceField> snapshots;
};

/// Initial surface layer Pi_0 v(x, 0, p) = v0 - c(p) h0(p) u_0^0(x, 0).
inline SurfaceField surface_layer_initial(const SurfaceField& v0,
                                          const ScalarField2& phi0_init,
                                          std::span<const double> c,
                                          const Spectrum& spectrum) {
  if (v0.np != static_cast<int>(spectrum.size()) || v0.nx != phi0_init.nx ||
      static_cast<int>(c.size()) != v0.np)
    throw GridMismatchError("surface_layer_initial: shape mismatch");
  SurfaceField out(v0.nx, v0.np);
  for (int i = 0; i < v0.nx; ++i)
    for (int k = 0; k < v0.np; ++k)
      out.at(i, k) = v0.at(i, k) - c[k] * spectrum.h0[k] * phi0_init.at(i, 0);
  return out;
}

/// Closed-form solution of Pi v_{0,tau} = alpha Pi u_0|_{z=0} - beta Pi v_0
/// for one fast time: per (x, p),
///   Pi v_0(tau) = e^{-beta tau} Pi v_0(0)
///               + alpha sum_{i>=1} u_i^0(x,0) h_i(p) (e^{lambda_i tau} - e^{-beta tau}) / (lambda_i + beta),
/// with the confluent case lambda_i = -beta handled through the
/// expm1((lambda + beta) tau) form (limit alpha u_i^0 h_i tau e^{-beta tau}).
inline SurfaceField eval_layer_v(const LayerModes& modes, const Spectrum& spectrum,
                                 std::span<const double> alpha, std::span<const double> beta,
                                 const SurfaceField& pi_v_init, double tau,
                                 double beta_min = 1e-8) {
  if (tau < 0.0) throw NumericalError("eval_layer_v: negative tau");
  const int np = static_cast<int>(spectrum.size());
  if (pi_v_init.np != np || pi_v_init.nx != modes.nx ||
      static_cast<int>(alpha.size()) != np || static_cast<int>(beta.size()) != np)
    throw GridMismatchError("eval_layer_v: shape mismatch");
  for (int k = 0; k < np; ++k)
    if (!(beta[k] >= beta_min)) throw ConfigError("eval_layer_v: beta below beta_min");

  SurfaceField out(modes.nx, np);
  double max_imag = 0.0, scale = 0.0;
  for (int k = 0; k < np; ++k) {
    const double decay = std::exp(-beta[k] * tau);
    for (int i = 0; i < modes.nx; ++i) {
      std::complex<double> acc = pi_v_init.at(i, k) * decay;
      const std::size_t surf = static_cast<std::size_t>(i) * modes.nz;  // j = 0
      for (std::size_t m = 0; m < modes.mode_count(); ++m) {
        const std::complex<double> lam_plus_beta = modes.lambdas[m] + beta[k];
        const std::complex<double> forcing =
            modes.amplitudes[m][surf] * spectrum.right_modes(k, m + 1);
        std::complex<double> shape;
        if (lam_plus_beta == 0.0) {
          shape = tau * decay;
        } else if (std::abs(lam_plus_beta) * tau <= 30.0) {
          // near-confluent: factor out the decay to avoid cancellation
          shape = decay * detail::expm1c(lam_plus_beta * tau) / lam_plus_beta;
        } else {
          // well-separated rates: both exponentials decay, evaluate directly
          shape = (std::exp(modes.lambdas[m] * tau) - decay) / lam_plus_beta;
        }
        acc += alpha[k] * forcing * shape;
      }
      out.at(i, k) = acc.real();
      max_imag = std::max(max_imag, std::abs(acc.imag()));
      scale = std::max(scale, std::abs(acc.real()));
    }
  }
  detail::check_imag_residual(max_imag, scale, "eval_layer_v");
  return out;
}

inline SurfaceLayer solve_layer_v(const LayerModes& modes, const Spectrum& spectrum,
                                  std::span<const double> alpha,
                                  std::span<const double> beta,
                                  const SurfaceField& pi_v_init,
                                  std::span<const double> taus, double beta_min = 1e-8) {
  SurfaceLayer layer;
  layer.taus.assign(taus.begin(), taus.end());
  layer.snapshots.reserve(taus.size());
  for (double tau : taus)
    layer.snapshots.push_back(
        eval_layer_v(modes, spectrum, alpha, beta, pi_v_init, tau, beta_min));
  return layer;
}

/// Condition 2 residual report: alpha(p) u0(x, 0, p) - beta(p) v0(x, p) over
/// all surface points, with the worst location.
struct Condition2Report {
  double max_residual = 0.0;
  double scale = 0.0;     // max |alpha u0| and |beta v0| seen
  double relative = 0.0;  // max_residual / max(scale, tiny)
  int x_index = 0;
  int p_index = 0;
  bool satisfied = true;
  double tol = 0.0;
};

inline Condition2Report check_condition2(const Field3& u0, const SurfaceField& v0,
                                         std::span<const double> alpha,
                                         std::span<const double> beta, double tol = 1e-10) {
  if (u0.nx != v0.nx || u0.np != v0.np)
    throw GridMismatchError("check_condition2: field shapes differ");
  if (static_cast<int>(alpha.size()) != u0.np || static_cast<int>(beta.size()) != u0.np)
    throw GridMismatchError("check_condition2: coefficient length mismatch");

  Condition2Report rep;
  rep.tol = tol;
  for (int i = 0; i < u0.nx; ++i) {
    for (int k = 0; k < u0.np; ++k) {
      const double dep = alpha[k] * u0.at(i, 0, k);
      const double pick = beta[k] * v0.at(i, k);
      const double r = std::abs(dep - pick);
      rep.scale = std::max({rep.scale, std::abs(dep), std::abs(pick)});
      if (r > rep.max_residual) {
        rep.max_residual = r;
        rep.x_index = i;
        rep.p_index = k;
      }
    }
  }
  rep.relative = rep.scale > 0.0 ? rep.max_residual / rep.scale
                                 : (rep.max_residual > 0.0 ? 1.0 : 0.0);
  rep.satisfied = rep.relative <= tol;
  return rep;
}

/// Repair mode: replace the surface data with the local deposition-pickup
/// equilibrium v0 = (alpha / beta) u0|_{z=0}.
inline SurfaceField repair_condition2(const Field3& u0, std::span<const double> alpha,
                                      std::span<const double> beta, double beta_min = 1e-8) {
  if (static_cast<int>(alpha.size()) != u0.np || static_cast<int>(beta.size()) != u0.np)
    throw GridMismatchError("repair_condition2: coefficient length mismatch");
  SurfaceField v(u0.nx, u0.np);
  for (int k = 0; k < u0.np; ++k) {
    if (!(beta[k] >= beta_min)) throw ConfigError("repair_condition2: beta below beta_min");
    for (int i = 0; i < u0.nx; ++i) v.at(i, k) = alpha[k] / beta[k] * u0.at(i, 0, k);
  }
  return v;
}

}  // namespace dustlayer
