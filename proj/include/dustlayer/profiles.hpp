// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dustlayer/errors.hpp"
#include "dustlayer/particle_grid.hpp"
#include "dustlayer/space_grid.hpp"

namespace dustlayer {

/// Transport coefficient profiles tabulated on the z-grid and ParticleGrid:
/// wind V(z), horizontal diffusivity Kx(z), vertical diffusivity Kz(z, p),
/// settling speed w(p), dry deposition rate alpha(p), pickup rate beta(p).
struct Profiles {
  std::vector<double> V;      // per z-node
  std::vector<double> Kx;     // per z-node
  std::vector<double> Kz;     // (z-node, p-node): j * np + k
  std::vector<double> w;      // per p-node
  std::vector<double> alpha;  // per p-node
  std::vector<double> beta;   // per p-node
  int nz = 0;
  int np = 0;

  double kz(int j, int k) const { return Kz[static_cast<std::size_t>(j) * np + k]; }
  double& kz(int j, int k) { return Kz[static_cast<std::size_t>(j) * np + k]; }

  void validate(double beta_min = 1e-8) const {
    auto expect = [](std::size_t got, std::size_t want, const char* name) {
      if (got != want)
        throw ConfigError(std::string("Profiles: ") + name + " has wrong length");
    };
    expect(V.size(), static_cast<std::size_t>(nz), "V");
    expect(Kx.size(), static_cast<std::size_t>(nz), "Kx");
    expect(Kz.size(), static_cast<std::size_t>(nz) * np, "Kz");
    expect(w.size(), static_cast<std::size_t>(np), "w");
    expect(alpha.size(), static_cast<std::size_t>(np), "alpha");
    expect(beta.size(), static_cast<std::size_t>(np), "beta");
    for (double v : V)
      if (!std::isfinite(v)) throw ConfigError("Profiles: non-finite V");
    for (double v : Kx)
      if (!std::isfinite(v) || v < 0.0) throw ConfigError("Profiles: Kx must be >= 0");
    for (double v : Kz)
      if (!std::isfinite(v) || v <= 0.0) throw ConfigError("Profiles: Kz must be > 0");
    for (double v : w)
      if (!std::isfinite(v)) throw ConfigError("Profiles: non-finite w");
    for (double v : alpha)
      if (!std::isfinite(v) || v < 0.0) throw ConfigError("Profiles: alpha must be >= 0");
    for (double v : beta)
      if (!std::isfinite(v) || v < beta_min)
        throw ConfigError("Profiles: beta below beta_min (" + std::to_string(beta_min) +
                          "); the construction assumes beta != 0");
  }
};

/// Piecewise-linear interpolation of (node, value) samples onto query points;
/// constant extrapolation beyond the sampled range.
inline std::vector<double> interp_linear(std::span<const double> xs,
                                         std::span<const double> ys,
                                         std::span<const double> queries) {
  if (xs.size() != ys.size() || xs.empty())
    throw ConfigError("interp_linear: bad sample table");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] <= xs[i - 1]) throw ConfigError("interp_linear: nodes must increase");
  std::vector<double> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const double x = queries[q];
    if (x <= xs.front()) {
      out[q] = ys.front();
    } else if (x >= xs.back()) {
      out[q] = ys.back();
    } else {
      std::size_t hi = 1;
      while (xs[hi] < x) ++hi;
      const double t = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
      out[q] = (1.0 - t) * ys[hi - 1] + t * ys[hi];
    }
  }
  return out;
}

namespace profile_family {

inline std::vector<double> constant(double value, int n) {
  return std::vector<double>(static_cast<std::size_t>(n), value);
}

inline std::vector<double> linear_in_z(const SpaceGrid& g, double value, double slope) {
  std::vector<double> out(static_cast<std::size_t>(g.nz));
  for (int j = 0; j < g.nz; ++j) out[j] = value + slope * g.z(j);
  return out;
}

/// Logarithmic wind profile u* / kappa * ln((z + z0) / z0).
inline std::vector<double> log_wind(const SpaceGrid& g, double ustar, double z0,
                                    double kappa = 0.4) {
  if (!(z0 > 0.0)) throw ConfigError("log_wind: z0 must be positive");
  std::vector<double> out(static_cast<std::size_t>(g.nz));
  for (int j = 0; j < g.nz; ++j) out[j] = ustar / kappa * std::log((g.z(j) + z0) / z0);
  return out;
}

}  // namespace profile_family

}  // namespace dustlayer
