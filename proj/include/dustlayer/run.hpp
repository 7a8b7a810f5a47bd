// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "dustlayer/assembly.hpp"
#include "dustlayer/config.hpp"
#include "dustlayer/text_io.hpp"

namespace dustlayer {

struct RunResult {
  int exit_code = 0;
  std::vector<std::string> outputs;
  std::string message;
};

namespace runner {

inline ParticleGrid build_particle_grid(const RunConfig& cfg, std::size_t required) {
  const ParticleSpec& p = cfg.particles;
  if (p.type.empty()) {
    if (required == 0) throw ConfigError("config error at particles: required here");
    return ParticleGrid::unit_bins(required);
  }
  ParticleGrid g = p.type == "uniform"
                       ? ParticleGrid::uniform(p.p1, p.p2, static_cast<std::size_t>(p.count))
                       : (p.weights.empty()
                              ? ParticleGrid::trapezoid(p.nodes)
                              : ParticleGrid::with_weights(p.nodes, p.weights));
  if (required != 0 && g.size() != required)
    throw ConfigError("config error at particles: size " + std::to_string(g.size()) +
                      " does not match operator size " + std::to_string(required));
  return g;
}

inline SizeOperator build_operator(const RunConfig& cfg) {
  const OperatorSpec& o = cfg.op;
  if (o.type == "builtin2" || o.type == "builtin3") {
    const std::size_t n = o.type == "builtin2" ? 2 : 3;
    Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(n, n);
    if (n == 2) {
      kernel(0, 1) = o.b;
      kernel(1, 0) = o.a;
    } else {
      kernel(0, 1) = kernel(1, 0) = kernel(1, 2) = kernel(2, 1) = 1.0;
    }
    ParticleGrid grid = cfg.particles.type.empty() ? ParticleGrid::unit_bins(n)
                                                   : build_particle_grid(cfg, n);
    return build_conservative_operator(kernel, std::move(grid));
  }
  const Eigen::MatrixXd m = io::read_matrix(o.path);
  ParticleGrid grid = cfg.particles.type.empty()
                          ? ParticleGrid::unit_bins(static_cast<std::size_t>(m.rows()))
                          : build_particle_grid(cfg, static_cast<std::size_t>(m.rows()));
  if (o.type == "kernel_file") return build_conservative_operator(m, std::move(grid));
  return make_size_operator(m, std::move(grid));
}

inline std::vector<double> build_z_profile(const CoefficientSpec& c, const SpaceGrid& g,
                                           const std::string& key) {
  if (c.family == "values") {
    if (c.values.size() == 1)
      return std::vector<double>(static_cast<std::size_t>(g.nz), c.values[0]);
    if (static_cast<int>(c.values.size()) == g.nz) return c.values;
    throw ConfigError("config error at profiles." + key +
                      ": literal array must have one entry or nz entries");
  }
  if (c.family == "constant")
    return std::vector<double>(static_cast<std::size_t>(g.nz), c.values[0]);
  if (c.family == "linear" || c.family == "linear_in_z")
    return profile_family::linear_in_z(g, c.values[0], c.slopes[0]);
  if (c.family == "log_wind") return profile_family::log_wind(g, c.ustar, c.z0);
  if (c.family == "file") {
    const auto table = io::read_coefficient_table(c.path);
    std::vector<double> zq(static_cast<std::size_t>(g.nz));
    for (int j = 0; j < g.nz; ++j) zq[j] = g.z(j);
    return interp_linear(table.nodes, table.columns.at(0), zq);
  }
  throw ConfigError("config error at profiles." + key + ": unsupported family '" +
                    c.family + "'");
}

inline std::vector<double> per_p(const CoefficientSpec& c, const ParticleGrid& pg,
                                 const std::string& key) {
  const std::size_t np = pg.size();
  if (c.family == "values" || c.family == "constant") {
    if (c.values.size() == 1) return std::vector<double>(np, c.values[0]);
    if (c.values.size() == np) return c.values;
    throw ConfigError("config error at profiles." + key +
                      ": expected one entry or np entries");
  }
  if (c.family == "file") {
    const auto table = io::read_coefficient_table(c.path);
    return interp_linear(table.nodes, table.columns.at(0), pg.nodes);
  }
  throw ConfigError("config error at profiles." + key + ": unsupported family '" +
                    c.family + "'");
}

inline Profiles build_profiles(const RunConfig& cfg, const SpaceGrid& g,
                               const ParticleGrid& pg) {
  const std::size_t np = pg.size();
  Profiles prof;
  prof.nz = g.nz;
  prof.np = static_cast<int>(np);
  prof.V = build_z_profile(cfg.V, g, "V");
  prof.Kx = build_z_profile(cfg.Kx, g, "Kx");

  prof.Kz.resize(static_cast<std::size_t>(g.nz) * np);
  const CoefficientSpec& kz = cfg.Kz;
  auto broadcast = [&](const std::vector<double>& v, const char* what) {
    if (v.size() == 1) return std::vector<double>(np, v[0]);
    if (v.size() == np) return v;
    throw ConfigError(std::string("config error at profiles.Kz.") + what +
                      ": expected one entry or np entries");
  };
  if (kz.family == "values" || kz.family == "constant") {
    const auto vals = broadcast(kz.values, "value");
    for (int j = 0; j < g.nz; ++j)
      for (std::size_t k = 0; k < np; ++k) prof.kz(j, static_cast<int>(k)) = vals[k];
  } else if (kz.family == "linear" || kz.family == "linear_in_z") {
    const auto vals = broadcast(kz.values, "value");
    const auto slopes = broadcast(kz.slopes, "slope");
    for (int j = 0; j < g.nz; ++j)
      for (std::size_t k = 0; k < np; ++k)
        prof.kz(j, static_cast<int>(k)) = vals[k] + slopes[k] * g.z(j);
  } else if (kz.family == "file") {
    const auto table = io::read_coefficient_table(kz.path);
    if (table.columns.size() != np)
      throw ConfigError("config error at profiles.Kz: file needs np value columns");
    std::vector<double> zq(static_cast<std::size_t>(g.nz));
    for (int j = 0; j < g.nz; ++j) zq[j] = g.z(j);
    for (std::size_t k = 0; k < np; ++k) {
      const auto col = interp_linear(table.nodes, table.columns[k], zq);
      for (int j = 0; j < g.nz; ++j) prof.kz(j, static_cast<int>(k)) = col[j];
    }
  } else {
    throw ConfigError("config error at profiles.Kz: unsupported family '" + kz.family +
                      "'");
  }

  prof.w = per_p(cfg.w, pg, "w");
  prof.alpha = per_p(cfg.alpha, pg, "alpha");
  prof.beta = per_p(cfg.beta, pg, "beta");
  prof.validate(cfg.tolerances.beta_min);
  return prof;
}

inline Field3 build_initial(const RunConfig& cfg, const SpaceGrid& g,
                            const Spectrum& sp) {
  if (cfg.initial.components.empty())
    throw ConfigError("config error at initial.components: required for this mode");
  Field3 u0(g.nx, g.nz, static_cast<int>(sp.size()));
  for (const InitialComponent& comp : cfg.initial.components) {
    if (comp.mode < 0 || comp.mode >= static_cast<int>(sp.size()))
      throw ConfigError("config error at initial.components.mode: out of range");
    for (int i = 0; i < g.nx; ++i) {
      const double xshape =
          comp.x_offset + comp.x_amp * std::cos(2.0 * std::numbers::pi * comp.x_harmonic *
                                                    g.x(i) / g.x_length +
                                                comp.x_phase);
      for (int j = 0; j < g.nz; ++j) {
        const double zz = (g.z(j) - comp.z_center) / comp.z_width;
        const double shape = comp.amplitude * xshape * std::exp(-zz * zz);
        for (int k = 0; k < u0.np; ++k)
          u0.at(i, j, k) += shape * sp.right_modes(k, comp.mode).real();
      }
    }
  }
  return u0;
}

inline SurfaceField build_v0(const RunConfig& cfg, const Field3& u0,
                             const Profiles& prof) {
  if (cfg.initial.v0_type == "condition2")
    return repair_condition2(u0, prof.alpha, prof.beta, cfg.tolerances.beta_min);
  SurfaceField v0(u0.nx, u0.np);
  if (cfg.initial.v0_type == "constant")
    for (double& v : v0.data) v = cfg.initial.v0_value;
  return v0;
}

/// Applies the condition-2 policy; returns the surface data to solve with.
inline SurfaceField apply_condition2_policy(const RunConfig& cfg, const Field3& u0,
                                            SurfaceField v0, const Profiles& prof,
                                            Condition2Report* out_report = nullptr) {
  const auto rep =
      check_condition2(u0, v0, prof.alpha, prof.beta, cfg.tolerances.condition2);
  if (out_report) *out_report = rep;
  if (rep.satisfied) return v0;
  if (cfg.condition2_policy == "strict")
    throw Condition2Error("initial data violate the surface equilibrium (relative "
                          "residual " +
                          io::format_double(rep.relative) + " at x=" +
                          std::to_string(rep.x_index) + ", p=" +
                          std::to_string(rep.p_index) + ")");
  return repair_condition2(u0, prof.alpha, prof.beta, cfg.tolerances.beta_min);
}

/// Deterministic output collector: files land in output_dir, the manifest
/// lists every one of them with a content hash.
class OutputSink {
public:
  OutputSink(std::filesystem::path dir, const RunConfig& cfg) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    manifest_["tool"] = "dustlayer";
    manifest_["version"] = "0.1.0";
    manifest_["versions"]["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                                     std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION);
    manifest_["mode"] = mode_name(cfg.mode);
    manifest_["config_hash"] =
        io::fnv1a_hex(cfg.config_text.empty() ? "(constructed)" : cfg.config_text);
    if (!cfg.config_text.empty()) {
      try {
        manifest_["config"] = nlohmann::json::parse(cfg.config_text, nullptr, true, true);
      } catch (const nlohmann::json::exception&) {
        manifest_["config"] = "(unparsed)";
      }
    }
  }

  void write(const std::string& name, const std::string& content) {
    io::write_file(dir_ / name, content);
    nlohmann::json entry;
    entry["name"] = name;
    entry["fnv1a"] = io::fnv1a_hex(content);
    manifest_["outputs"].push_back(entry);
    names_.push_back(name);
  }

  template <typename T>
  void note(const std::string& key, const T& value) {
    manifest_[key] = value;
  }
  nlohmann::json& meta() { return manifest_; }

  std::vector<std::string> finish() {
    io::write_file(dir_ / "manifest.json", manifest_.dump(2) + "\n");
    names_.push_back("manifest.json");
    return names_;
  }

private:
  std::filesystem::path dir_;
  nlohmann::json manifest_;
  std::vector<std::string> names_;
};

inline std::string csv_phi0(const ReducedTrajectory& traj) {
  io::CsvWriter csv({"t", "x", "z", "phi0"});
  for (std::size_t s = 0; s < traj.times.size(); ++s)
    for (int i = 0; i < traj.grid.nx; ++i)
      for (int j = 0; j < traj.grid.nz; ++j)
        csv.row({io::format_double(traj.times[s]), io::format_double(traj.grid.x(i)),
                 io::format_double(traj.grid.z(j)),
                 io::format_double(traj.snapshots[s].at(i, j))});
  return csv.str();
}

inline std::string csv_field3(const std::vector<double>& times,
                              const std::vector<Field3>& snaps, const SpaceGrid& g,
                              const ParticleGrid& pg, const char* value_name,
                              const std::vector<Field3>* regular = nullptr,
                              const std::vector<Field3>* layer = nullptr) {
  std::vector<std::string> cols{"t", "x", "z", "p", value_name};
  if (regular) {
    cols.emplace_back("regular");
    cols.emplace_back("layer");
  }
  io::CsvWriter csv(cols);
  for (std::size_t s = 0; s < times.size(); ++s)
    for (int i = 0; i < g.nx; ++i)
      for (int j = 0; j < g.nz; ++j)
        for (std::size_t k = 0; k < pg.size(); ++k) {
          std::vector<std::string> row{
              io::format_double(times[s]), io::format_double(g.x(i)),
              io::format_double(g.z(j)), io::format_double(pg.nodes[k]),
              io::format_double(snaps[s].at(i, j, static_cast<int>(k)))};
          if (regular) {
            row.push_back(
                io::format_double((*regular)[s].at(i, j, static_cast<int>(k))));
            row.push_back(io::format_double((*layer)[s].at(i, j, static_cast<int>(k))));
          }
          csv.row(row);
        }
  return csv.str();
}

inline std::string csv_surface(const std::vector<double>& times,
                               const std::vector<SurfaceField>& snaps, const SpaceGrid& g,
                               const ParticleGrid& pg, const char* value_name,
                               const std::vector<SurfaceField>* regular = nullptr,
                               const std::vector<SurfaceField>* layer = nullptr) {
  std::vector<std::string> cols{"t", "x", "p", value_name};
  if (regular) {
    cols.emplace_back("regular");
    cols.emplace_back("layer");
  }
  io::CsvWriter csv(cols);
  for (std::size_t s = 0; s < times.size(); ++s)
    for (int i = 0; i < g.nx; ++i)
      for (std::size_t k = 0; k < pg.size(); ++k) {
        std::vector<std::string> row{
            io::format_double(times[s]), io::format_double(g.x(i)),
            io::format_double(pg.nodes[k]),
            io::format_double(snaps[s].at(i, static_cast<int>(k)))};
        if (regular) {
          row.push_back(io::format_double((*regular)[s].at(i, static_cast<int>(k))));
          row.push_back(io::format_double((*layer)[s].at(i, static_cast<int>(k))));
        }
        csv.row(row);
      }
  return csv.str();
}

inline std::string csv_diagnostics(const std::vector<DiagnosticsRow>& rows) {
  io::CsvWriter csv({"t", "generalized_mass", "u_min", "u_max", "v_min", "v_max",
                     "split_error_u", "split_error_v"});
  for (const auto& r : rows)
    csv.row({io::format_double(r.t), io::format_double(r.generalized_mass),
             io::format_double(r.u_min), io::format_double(r.u_max),
             io::format_double(r.v_min), io::format_double(r.v_max),
             io::format_double(r.split_error_u), io::format_double(r.split_error_v)});
  return csv.str();
}

inline std::string csv_error_table(const ErrorTable& table) {
  io::CsvWriter csv({"epsilon", "grid", "t", "kind", "norm", "value"});
  for (const auto& r : table.rows)
    csv.row({io::format_double(r.epsilon), r.grid, io::format_double(r.t), r.kind,
             r.norm, io::format_double(r.value)});
  return csv.str();
}

inline std::string csv_orders(const ErrorTable& table) {
  io::CsvWriter csv({"kind", "grid", "eps_coarse", "eps_fine", "order"});
  for (const auto& o : table.orders)
    csv.row({o.kind, o.grid, io::format_double(o.eps_coarse),
             io::format_double(o.eps_fine), io::format_double(o.order)});
  return csv.str();
}

inline std::string csv_timings(const ErrorTable& table) {
  io::CsvWriter csv({"epsilon", "grid", "runtime_sec"});
  std::vector<std::pair<double, std::string>> seen;
  for (const auto& r : table.rows) {
    if (r.kind == "richardson_delta") continue;
    const auto key = std::make_pair(r.epsilon, r.grid);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    csv.row({io::format_double(r.epsilon), r.grid, io::format_double(r.runtime_sec)});
  }
  return csv.str();
}

/// Everything the solver modes share.
struct Workspace {
  SpaceGrid grid;
  SizeOperator op;
  Spectrum spectrum;
  Profiles profiles;
  EffectiveCoefficients eff;
  Field3 u0;
  SurfaceField v0;
  InitialDecomposition dec;
  LayerData layers;
  Condition2Report c2_report;
};

inline Workspace build_workspace(const RunConfig& cfg) {
  Workspace w;
  w.grid = SpaceGrid{cfg.nx, cfg.nz, cfg.x_length, cfg.z_top};
  w.grid.validate();
  w.op = build_operator(cfg);
  w.spectrum = spectral_decompose(w.op, cfg.tolerances.tol_zero, cfg.tolerances.gap_min);
  w.profiles = build_profiles(cfg, w.grid, w.op.grid);
  w.eff = effective_coefficients(w.profiles, w.spectrum, w.op.grid,
                                 cfg.tolerances.beta_min);
  w.u0 = build_initial(cfg, w.grid, w.spectrum);
  w.v0 = apply_condition2_policy(cfg, w.u0, build_v0(cfg, w.u0, w.profiles), w.profiles,
                                 &w.c2_report);
  w.dec = decompose_initial(w.u0, w.spectrum, cfg.tolerances.projection);
  w.layers = LayerData{w.dec.modes,
                       surface_layer_initial(w.v0, w.dec.phi0_init, w.eff.c, w.spectrum),
                       w.profiles.alpha, w.profiles.beta, cfg.tolerances.beta_min};
  return w;
}

inline StepControl step_control(const RunConfig& cfg) {
  StepControl c;
  c.dt = cfg.time.dt;
  c.cfl_safety = cfg.time.cfl_safety;
  c.threads = resolve_threads(cfg.threads);
  return c;
}

}  // namespace runner

/// Executes one configured run, emitting all artifacts into the output
/// directory. Returns the exit code and the list of emitted files.
inline RunResult run(const RunConfig& cfg) {
  using namespace runner;
  RunResult result;
  OutputSink sink(cfg.output_dir, cfg);
  {
    nlohmann::json grids;
    grids["nx"] = cfg.nx;
    grids["nz"] = cfg.nz;
    grids["x_length"] = cfg.x_length;
    grids["z_top"] = cfg.z_top;
    sink.note("grids", grids);
    nlohmann::json scheme;
    scheme["splitting"] = "lie: exact size relaxation, exact surface exchange, explicit transport";
    scheme["advection"] = "first-order upwind";
    scheme["diffusion"] = "second-order central, flux form";
    scheme["time"] = "explicit Euler segments hitting snapshot times exactly";
    sink.note("scheme", scheme);
    sink.note("threads", resolve_threads(cfg.threads));
  }

  try {
    switch (cfg.mode) {
      case RunMode::spectrum: {
        const SizeOperator op = build_operator(cfg);
        try {
          const Spectrum sp =
              spectral_decompose(op, cfg.tolerances.tol_zero, cfg.tolerances.gap_min);
          sink.write("spectrum.txt", io::spectrum_report(sp, cfg.tolerances.gap_min));
          sink.note("condition1", "satisfied");
        } catch (const Condition1Error& e) {
          sink.write("spectrum.txt",
                     std::string("condition1: violated\nreason ") + e.what() + "\n");
          sink.note("condition1", "violated");
          result.exit_code = static_cast<int>(ExitCode::condition1_failure);
          result.message = e.what();
        }
        break;
      }

      case RunMode::check: {
        Workspace w;
        w.grid = SpaceGrid{cfg.nx, cfg.nz, cfg.x_length, cfg.z_top};
        w.grid.validate();
        w.op = build_operator(cfg);
        w.spectrum =
            spectral_decompose(w.op, cfg.tolerances.tol_zero, cfg.tolerances.gap_min);
        w.profiles = build_profiles(cfg, w.grid, w.op.grid);
        const Field3 u0 = build_initial(cfg, w.grid, w.spectrum);
        const SurfaceField v0 = build_v0(cfg, u0, w.profiles);
        const auto rep = check_condition2(u0, v0, w.profiles.alpha, w.profiles.beta,
                                          cfg.tolerances.condition2);
        std::string report = io::condition2_report(rep, cfg.condition2_policy);
        if (!rep.satisfied && cfg.condition2_policy == "repair") {
          const SurfaceField fixed =
              repair_condition2(u0, w.profiles.alpha, w.profiles.beta,
                                cfg.tolerances.beta_min);
          const auto rep2 = check_condition2(u0, fixed, w.profiles.alpha,
                                             w.profiles.beta, cfg.tolerances.condition2);
          report += "# after repair\n";
          report += io::condition2_report(rep2, "repair");
        }
        sink.write("condition2.txt", report);
        if (!rep.satisfied && cfg.condition2_policy == "strict") {
          result.exit_code = static_cast<int>(ExitCode::condition2_failure);
          result.message = "condition 2 violated (strict policy)";
        }
        break;
      }

      case RunMode::asymptotic: {
        Workspace w = build_workspace(cfg);
        const double eps = cfg.epsilons.at(0);
        const auto control = step_control(cfg);
        const auto reduced =
            solve_phi0(w.eff, w.profiles.V, w.profiles.Kx, w.grid, w.dec.phi0_init,
                       cfg.time.horizon, cfg.time.snapshots, control);
        const auto comp = compose_asymptotic(reduced, w.layers, w.spectrum, w.eff, eps);
        sink.write("phi0.csv", csv_phi0(reduced));
        sink.write("composite_u.csv",
                   csv_field3(comp.times, comp.u, w.grid, w.op.grid, "u",
                              &comp.u_regular, &comp.u_layer));
        sink.write("composite_v.csv",
                   csv_surface(comp.times, comp.v, w.grid, w.op.grid, "v",
                               &comp.v_regular, &comp.v_layer));
        sink.note("epsilon", eps);
        sink.note("reduced_dt", reduced.dt_used);
        sink.note("reduced_steps", reduced.total_steps);
        sink.note("phi0_min", reduced.min_value);
        break;
      }

      case RunMode::direct: {
        Workspace w = build_workspace(cfg);
        const double eps = cfg.epsilons.at(0);
        const auto control = step_control(cfg);
        const auto traj = solve_full(w.profiles, w.op, eps, w.u0, w.v0, w.grid,
                                     cfg.time.horizon, cfg.time.snapshots, control);
        sink.write("direct_u.csv",
                   csv_field3(traj.times, traj.u, w.grid, w.op.grid, "u"));
        sink.write("direct_v.csv",
                   csv_surface(traj.times, traj.v, w.grid, w.op.grid, "v"));
        sink.write("diagnostics.csv",
                   csv_diagnostics(step_diagnostics(traj, w.spectrum)));
        sink.note("epsilon", eps);
        sink.note("full_dt", traj.dt_used);
        sink.note("full_steps", traj.total_steps);
        break;
      }

      case RunMode::compare: {
        Workspace w = build_workspace(cfg);
        const double eps = cfg.epsilons.at(0);
        const auto control = step_control(cfg);
        const auto reduced =
            solve_phi0(w.eff, w.profiles.V, w.profiles.Kx, w.grid, w.dec.phi0_init,
                       cfg.time.horizon, cfg.time.snapshots, control);
        const auto comp = compose_asymptotic(reduced, w.layers, w.spectrum, w.eff, eps);
        const auto direct = solve_full(w.profiles, w.op, eps, w.u0, w.v0, w.grid,
                                       cfg.time.horizon, cfg.time.snapshots, control);
        sink.write("phi0.csv", csv_phi0(reduced));
        sink.write("composite_u.csv",
                   csv_field3(comp.times, comp.u, w.grid, w.op.grid, "u",
                              &comp.u_regular, &comp.u_layer));
        sink.write("composite_v.csv",
                   csv_surface(comp.times, comp.v, w.grid, w.op.grid, "v",
                               &comp.v_regular, &comp.v_layer));
        sink.write("direct_u.csv",
                   csv_field3(direct.times, direct.u, w.grid, w.op.grid, "u"));
        sink.write("direct_v.csv",
                   csv_surface(direct.times, direct.v, w.grid, w.op.grid, "v"));
        sink.write("diagnostics.csv",
                   csv_diagnostics(step_diagnostics(direct, w.spectrum)));
        sink.note("phi0_min", reduced.min_value);

        ErrorTable table;
        const auto cmp = compare_fields(comp, direct, w.op.grid);
        for (const auto& r : cmp) {
          const std::string gname = w.grid.describe();
          table.rows.push_back({eps, gname, r.t, "error_u", "l2", r.u_l2, 0.0});
          table.rows.push_back({eps, gname, r.t, "error_u", "sup", r.u_sup, 0.0});
          table.rows.push_back({eps, gname, r.t, "error_v", "l2", r.v_l2, 0.0});
          table.rows.push_back({eps, gname, r.t, "error_v", "sup", r.v_sup, 0.0});
          table.rows.push_back({eps, gname, r.t, "error_total", "l2", r.total_l2, 0.0});
        }
        for (const auto& r : residual_of(comp, w.profiles, w.op, eps)) {
          const std::string gname = w.grid.describe();
          table.rows.push_back({eps, gname, r.t, "residual_interior", "l2", r.a_l2, 0.0});
          table.rows.push_back({eps, gname, r.t, "residual_interior", "sup", r.a_sup, 0.0});
          table.rows.push_back({eps, gname, r.t, "residual_flux", "l2", r.b_l2, 0.0});
          table.rows.push_back({eps, gname, r.t, "residual_flux", "sup", r.b_sup, 0.0});
          table.rows.push_back({eps, gname, r.t, "residual_exchange", "l2", r.c_l2, 0.0});
          table.rows.push_back({eps, gname, r.t, "residual_exchange", "sup", r.c_sup, 0.0});
        }
        sink.write("error_table.csv", csv_error_table(table));
        sink.note("epsilon", eps);
        break;
      }

      case RunMode::converge: {
        Workspace probe = build_workspace(cfg);  // validates the configuration early
        ExperimentSpec spec;
        spec.grid = probe.grid;
        spec.op = probe.op;
        spec.make_profiles = [cfg](const SpaceGrid& g) {
          const SizeOperator op = build_operator(cfg);
          return build_profiles(cfg, g, op.grid);
        };
        spec.make_u0 = [cfg](const SpaceGrid& g, const Spectrum& sp) {
          return build_initial(cfg, g, sp);
        };
        spec.epsilons = cfg.epsilons;
        spec.compare_at = cfg.time.compare_at;
        spec.fd_delta = cfg.time.fd_delta;
        spec.reduced_control = step_control(cfg);
        spec.full_control = step_control(cfg);
        spec.richardson = cfg.richardson;
        spec.richardson_threshold = cfg.richardson_threshold;
        spec.tol_zero = cfg.tolerances.tol_zero;
        spec.gap_min = cfg.tolerances.gap_min;
        spec.beta_min = cfg.tolerances.beta_min;
        spec.projection_tol = cfg.tolerances.projection;

        const StudyResult study = convergence_study(spec);
        sink.write("error_table.csv", csv_error_table(study.table));
        sink.write("orders.csv", csv_orders(study.table));
        if (cfg.emit_timings) sink.write("timings.csv", csv_timings(study.table));

        std::string summary;
        summary += "# epsilon convergence summary\n";
        summary += "fit_grid " + study.fit_grid + "\n";
        summary += "richardson_ok " + std::string(study.richardson_ok ? "yes" : "no") +
                   "\n";
        summary += "richardson_delta_max " +
                   io::format_double(study.richardson_delta_max) + "\n";
        for (const auto& o : study.table.orders)
          summary += "order " + o.kind + " " + io::format_double(o.eps_coarse) + "->" +
                     io::format_double(o.eps_fine) + " = " +
                     io::format_double(o.order) + "\n";
        sink.write("summary.txt", summary);
        sink.note("richardson_ok", study.richardson_ok);
        break;
      }
    }
  } catch (const Error& e) {
    result.exit_code = static_cast<int>(e.exit_code());
    result.message = e.what();
    sink.note("error", e.what());
  }

  result.outputs = sink.finish();
  return result;
}

}  // namespace dustlayer
