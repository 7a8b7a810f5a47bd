// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dustlayer/errors.hpp"
#include "dustlayer/particle_grid.hpp"
#include "dustlayer/profiles.hpp"
#include "dustlayer/spectrum.hpp"

namespace dustlayer {

/// Size-averaged coefficients of the reduced problem:
///   w_ef     = (h0 w, h0*)
///   Kz_ef(z) = (h0 Kz(z, .), h0*)
///   c(p)     = alpha(p) / beta(p)
///   c_ef     = (c h0, h0*)
struct EffectiveCoefficients {
  double w_ef = 0.0;
  double c_ef = 0.0;
  std::vector<double> Kz_ef;  // per z-node
  std::vector<double> c;      // per p-node
};

inline EffectiveCoefficients effective_coefficients(const Profiles& profiles,
                                                    const Spectrum& spectrum,
                                                    const ParticleGrid& grid,
                                                    double beta_min = 1e-8) {
  if (static_cast<std::size_t>(profiles.np) != grid.size())
    throw GridMismatchError("effective_coefficients: profiles/grid p-count mismatch");
  if (static_cast<Eigen::Index>(grid.size()) != spectrum.size())
    throw GridMismatchError("effective_coefficients: spectrum/grid size mismatch");
  profiles.validate(beta_min);

  const std::size_t np = grid.size();
  auto pair_with_h0 = [&](auto&& coef_at) {
    double acc = 0.0;
    for (std::size_t k = 0; k < np; ++k)
      acc += grid.weights[k] * spectrum.h0[k] * coef_at(k) * spectrum.h0_adj[k];
    return acc;
  };

  EffectiveCoefficients eff;
  eff.w_ef = pair_with_h0([&](std::size_t k) { return profiles.w[k]; });
  eff.c.resize(np);
  for (std::size_t k = 0; k < np; ++k) eff.c[k] = profiles.alpha[k] / profiles.beta[k];
  eff.c_ef = pair_with_h0([&](std::size_t k) { return eff.c[k]; });
  eff.Kz_ef.resize(profiles.nz);
  for (int j = 0; j < profiles.nz; ++j) {
    eff.Kz_ef[j] =
        pair_with_h0([&](std::size_t k) { return profiles.kz(j, static_cast<int>(k)); });
    if (!(eff.Kz_ef[j] > 0.0))
      throw NumericalError("effective_coefficients: Kz_ef <= 0 at z-node " +
                           std::to_string(j) + " (nonphysical equilibrium mode or inputs)");
  }
  if (!std::isfinite(eff.w_ef) || !std::isfinite(eff.c_ef))
    throw NumericalError("effective_coefficients: non-finite result");
  return eff;
}

}  // namespace dustlayer
