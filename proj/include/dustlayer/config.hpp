// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dustlayer/errors.hpp"
#include "dustlayer/text_io.hpp"

namespace dustlayer {

enum class RunMode { spectrum, check, asymptotic, direct, compare, converge };

inline RunMode parse_mode(const std::string& s) {
  if (s == "spectrum") return RunMode::spectrum;
  if (s == "check") return RunMode::check;
  if (s == "asymptotic") return RunMode::asymptotic;
  if (s == "direct") return RunMode::direct;
  if (s == "compare") return RunMode::compare;
  if (s == "converge") return RunMode::converge;
  throw ConfigError("config error at mode: unknown mode '" + s + "'");
}

inline std::string mode_name(RunMode m) {
  switch (m) {
    case RunMode::spectrum: return "spectrum";
    case RunMode::check: return "check";
    case RunMode::asymptotic: return "asymptotic";
    case RunMode::direct: return "direct";
    case RunMode::compare: return "compare";
    case RunMode::converge: return "converge";
  }
  return "?";
}

/// Source of the size operator.
struct OperatorSpec {
  std::string type;  // builtin2 | builtin3 | matrix_file | kernel_file
  double a = 1.0, b = 2.0;
  std::string path;
};

/// Particle grid; when empty the built-in operators supply unit bins.
struct ParticleSpec {
  std::string type;  // "", explicit, uniform
  std::vector<double> nodes, weights;
  double p1 = 0.0, p2 = 1.0;
  int count = 0;
};

/// One tabulated coefficient. `values` are per p-node where applicable.
struct CoefficientSpec {
  std::string family;  // constant | linear_in_z | log_wind | file | values
  std::vector<double> values;
  std::vector<double> slopes;
  double ustar = 0.0, z0 = 0.1;
  std::string path;
};

struct InitialComponent {
  int mode = 0;  // eigenmode index the component multiplies
  double amplitude = 1.0;
  double x_offset = 0.0, x_amp = 0.0;
  int x_harmonic = 1;
  double x_phase = 0.0;
  double z_center = 0.5, z_width = 0.2;
};

struct InitialSpec {
  std::vector<InitialComponent> components;
  std::string v0_type = "condition2";  // condition2 | zero | constant
  double v0_value = 0.0;
};

struct TimeSpec {
  double horizon = 1.0;
  std::vector<double> snapshots;
  double dt = 0.0;
  double cfl_safety = 0.9;
  double compare_at = 0.5;
  double fd_delta = 1e-3;
};

struct ToleranceSpec {
  double tol_zero = 0.0;  // 0 -> 1e-8 * ||A||
  double gap_min = 1e-6;
  double beta_min = 1e-8;
  double projection = 1e-8;
  double condition2 = 1e-10;
};

struct RunConfig {
  RunMode mode = RunMode::spectrum;
  std::string output_dir = "out";
  int threads = 1;

  int nx = 16, nz = 17;
  double x_length = 1.0, z_top = 1.0;

  OperatorSpec op;
  ParticleSpec particles;
  CoefficientSpec V, Kx, Kz, w, alpha, beta;
  InitialSpec initial;

  std::vector<double> epsilons;
  TimeSpec time;
  ToleranceSpec tolerances;
  std::string condition2_policy = "repair";  // strict | repair
  bool richardson = true;
  double richardson_threshold = 0.10;
  bool emit_timings = false;

  std::string config_text;  // original file contents, for the manifest hash

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::filesystem::path& path);
  void validate() const;
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& key, const std::string& what) {
  throw ConfigError("config error at " + key + ": " + what);
}

template <typename T>
T get_req(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) config_fail(key, "missing required key");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    config_fail(key, e.what());
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    config_fail(key, e.what());
  }
}

/// Scalar or array-of-double; scalars broadcast later.
inline std::vector<double> get_scalar_or_array(const nlohmann::json& j,
                                               const std::string& key) {
  if (!j.contains(key)) config_fail(key, "missing required key");
  const auto& v = j.at(key);
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) {
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) config_fail(key, "array entries must be numbers");
      out.push_back(e.get<double>());
    }
    if (out.empty()) config_fail(key, "array must not be empty");
    return out;
  }
  config_fail(key, "expected number or array");
}

inline CoefficientSpec parse_profile_coefficient(const nlohmann::json& j,
                                                 const std::string& key) {
  CoefficientSpec c;
  if (!j.contains(key)) config_fail(key, "missing required key");
  const auto& v = j.at(key);
  if (v.is_number() || v.is_array()) {
    c.family = "values";
    c.values = get_scalar_or_array(j, key);
    return c;
  }
  if (!v.is_object()) config_fail(key, "expected number, array, or object");
  c.family = get_or<std::string>(v, "family", v.contains("path") ? "file" : "constant");
  if (c.family == "file") {
    c.path = get_req<std::string>(v, "path");
    return c;
  }
  if (c.family == "log_wind") {
    c.ustar = get_req<double>(v, "ustar");
    c.z0 = get_req<double>(v, "z0");
    return c;
  }
  if (c.family == "constant" || c.family == "linear" || c.family == "linear_in_z") {
    if (v.contains("value")) c.values = get_scalar_or_array(v, "value");
    if (v.contains("slope")) c.slopes = get_scalar_or_array(v, "slope");
    if (c.values.empty()) config_fail(key + ".value", "missing required key");
    if (c.family == "constant" && !c.slopes.empty())
      config_fail(key + ".slope", "constant family takes no slope");
    if (c.family != "constant" && c.slopes.empty()) c.slopes = {0.0};
    return c;
  }
  config_fail(key + ".family", "unknown family '" + c.family + "'");
}

}  // namespace detail

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
  using detail::get_or;
  using detail::get_req;
  RunConfig c;
  c.mode = parse_mode(get_req<std::string>(j, "mode"));
  c.output_dir = get_or<std::string>(j, "output_dir", "out");
  c.threads = get_or<int>(j, "threads", 1);

  {
    const auto& g = j.contains("grid") ? j.at("grid") : nlohmann::json::object();
    c.nx = get_or<int>(g, "nx", c.nx);
    c.nz = get_or<int>(g, "nz", c.nz);
    c.x_length = get_or<double>(g, "x_length", c.x_length);
    c.z_top = get_or<double>(g, "z_top", c.z_top);
  }

  {
    if (!j.contains("operator")) detail::config_fail("operator", "missing required key");
    const auto& o = j.at("operator");
    c.op.type = get_req<std::string>(o, "type");
    c.op.a = get_or<double>(o, "a", 1.0);
    c.op.b = get_or<double>(o, "b", 2.0);
    if (c.op.type == "matrix_file" || c.op.type == "kernel_file")
      c.op.path = get_req<std::string>(o, "path");
    else if (c.op.type != "builtin2" && c.op.type != "builtin3")
      detail::config_fail("operator.type", "unknown type '" + c.op.type + "'");
  }

  if (j.contains("particles")) {
    const auto& p = j.at("particles");
    c.particles.type = get_or<std::string>(p, "type", "explicit");
    if (c.particles.type == "explicit") {
      c.particles.nodes = detail::get_scalar_or_array(p, "nodes");
      if (p.contains("weights"))
        c.particles.weights = detail::get_scalar_or_array(p, "weights");
    } else if (c.particles.type == "uniform") {
      const auto range = detail::get_scalar_or_array(p, "range");
      if (range.size() != 2) detail::config_fail("particles.range", "expected [p1, p2]");
      c.particles.p1 = range[0];
      c.particles.p2 = range[1];
      c.particles.count = get_req<int>(p, "count");
    } else {
      detail::config_fail("particles.type", "unknown type '" + c.particles.type + "'");
    }
  }

  {
    if (!j.contains("profiles")) detail::config_fail("profiles", "missing required key");
    const auto& p = j.at("profiles");
    c.V = detail::parse_profile_coefficient(p, "V");
    c.Kx = detail::parse_profile_coefficient(p, "Kx");
    c.Kz = detail::parse_profile_coefficient(p, "Kz");
    c.w = detail::parse_profile_coefficient(p, "w");
    c.alpha = detail::parse_profile_coefficient(p, "alpha");
    c.beta = detail::parse_profile_coefficient(p, "beta");
  }

  if (j.contains("initial")) {
    const auto& ini = j.at("initial");
    if (ini.contains("components")) {
      for (const auto& comp : ini.at("components")) {
        InitialComponent ic;
        ic.mode = get_or<int>(comp, "mode", 0);
        ic.amplitude = get_or<double>(comp, "amplitude", 1.0);
        ic.x_offset = get_or<double>(comp, "x_offset", 0.0);
        ic.x_amp = get_or<double>(comp, "x_amp", 0.0);
        ic.x_harmonic = get_or<int>(comp, "x_harmonic", 1);
        ic.x_phase = get_or<double>(comp, "x_phase", 0.0);
        ic.z_center = get_or<double>(comp, "z_center", 0.5);
        ic.z_width = get_or<double>(comp, "z_width", 0.2);
        c.initial.components.push_back(ic);
      }
    }
    if (ini.contains("v0")) {
      const auto& v0 = ini.at("v0");
      c.initial.v0_type = get_or<std::string>(v0, "type", "condition2");
      c.initial.v0_value = get_or<double>(v0, "value", 0.0);
      if (c.initial.v0_type != "condition2" && c.initial.v0_type != "zero" &&
          c.initial.v0_type != "constant")
        detail::config_fail("initial.v0.type",
                            "unknown type '" + c.initial.v0_type + "'");
    }
  }

  if (j.contains("epsilon")) c.epsilons = detail::get_scalar_or_array(j, "epsilon");

  if (j.contains("time")) {
    const auto& t = j.at("time");
    c.time.horizon = get_or<double>(t, "horizon", 1.0);
    if (t.contains("snapshots")) c.time.snapshots = detail::get_scalar_or_array(t, "snapshots");
    c.time.dt = get_or<double>(t, "dt", 0.0);
    c.time.cfl_safety = get_or<double>(t, "cfl_safety", 0.9);
    c.time.compare_at = get_or<double>(t, "compare_at", 0.5 * c.time.horizon);
    c.time.fd_delta = get_or<double>(t, "fd_delta", 1e-3);
  }

  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    c.tolerances.tol_zero = get_or<double>(t, "tol_zero", 0.0);
    c.tolerances.gap_min = get_or<double>(t, "gap_min", 1e-6);
    c.tolerances.beta_min = get_or<double>(t, "beta_min", 1e-8);
    c.tolerances.projection = get_or<double>(t, "projection", 1e-8);
    c.tolerances.condition2 = get_or<double>(t, "condition2", 1e-10);
  }

  c.condition2_policy = get_or<std::string>(j, "condition2", "repair");
  if (c.condition2_policy != "strict" && c.condition2_policy != "repair")
    detail::config_fail("condition2", "expected 'strict' or 'repair'");

  if (j.contains("converge")) {
    const auto& cv = j.at("converge");
    c.richardson = get_or<bool>(cv, "richardson", true);
    c.richardson_threshold = get_or<double>(cv, "richardson_threshold", 0.10);
  }
  c.emit_timings = get_or<bool>(j, "emit_timings", false);

  c.validate();
  return c;
}

inline RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config error at " + path.string() + ": " + e.what());
  }
  RunConfig c = from_json(j);
  c.config_text = text;

  // relative data paths resolve against the configuration file's directory
  const std::filesystem::path base = path.has_parent_path()
                                         ? path.parent_path()
                                         : std::filesystem::path(".");
  auto anchor = [&base](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative())
      p = (base / p).string();
  };
  anchor(c.op.path);
  anchor(c.V.path);
  anchor(c.Kx.path);
  anchor(c.Kz.path);
  anchor(c.w.path);
  anchor(c.alpha.path);
  anchor(c.beta.path);
  return c;
}

inline void RunConfig::validate() const {
  if (nx < 1) detail::config_fail("grid.nx", "must be >= 1");
  if (nz < 3) detail::config_fail("grid.nz", "must be >= 3");
  if (!(x_length > 0.0)) detail::config_fail("grid.x_length", "must be positive");
  if (!(z_top > 0.0)) detail::config_fail("grid.z_top", "must be positive");
  if (threads < 0) detail::config_fail("threads", "must be >= 0");
  for (double e : epsilons)
    if (!(e > 0.0) || e > 1.0) detail::config_fail("epsilon", "values must lie in (0, 1]");
  if (!(time.horizon > 0.0)) detail::config_fail("time.horizon", "must be positive");
  for (std::size_t i = 0; i < time.snapshots.size(); ++i) {
    if (time.snapshots[i] < 0.0 || time.snapshots[i] > time.horizon * (1.0 + 1e-12))
      detail::config_fail("time.snapshots", "times must lie within [0, horizon]");
    if (i > 0 && time.snapshots[i] <= time.snapshots[i - 1])
      detail::config_fail("time.snapshots", "times must be strictly increasing");
  }
  if (!(time.cfl_safety > 0.0) || time.cfl_safety > 1.0)
    detail::config_fail("time.cfl_safety", "must lie in (0, 1]");
  if (mode == RunMode::converge && epsilons.empty())
    detail::config_fail("epsilon", "converge mode needs at least one value");
  if ((mode == RunMode::direct || mode == RunMode::compare ||
       mode == RunMode::asymptotic) &&
      epsilons.empty())
    detail::config_fail("epsilon", "this mode needs an epsilon value");
}

}  // namespace dustlayer
