#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "phasecell/json_io.hpp"
#include "phasecell/master_equation.hpp"
#include "phasecell/window_density.hpp"

namespace phasecell {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> v{"states",        "projector", "evolve", "closeness",
                                          "probabilities", "audit",     "regime", "scaling"};
  return v;
}

/// Test state of a scenario.
struct StateSpec {
  enum class Kind { None, Gaussian, BroadGaussian, Window, Level, Remainder, Random };
  Kind kind = Kind::None;
  double q0 = 0.0, p0 = 0.0;
  double var_x = 1.0, var_p = 1.0, cov = 0.0;
  double cells_x = 0.0, cells_p = 0.0;  // broad Gaussian widths in cell units
  int K = 1;
  std::int64_t n = 0, m = 0;
  int rank = 1;

  bool is_gaussian() const { return kind == Kind::Gaussian || kind == Kind::BroadGaussian; }
  bool is_lattice() const { return kind == Kind::Window || kind == Kind::Level || kind == Kind::Remainder; }
};

struct Scenario {
  std::string experiment;
  PhysConfig physics;
  std::optional<BathParams> bath;
  StateSpec state;
  json params = json::object();
  std::string out_dir = "out";
  std::string format = "json";
  std::uint64_t seed = 0;
};

namespace detail {

inline IntRange parse_range(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw ValidationError(std::string(what) + " must be [lo, hi] integers");
  IntRange r{j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
  if (r.empty()) throw ValidationError(std::string(what) + " is empty");
  return r;
}

template <class T>
T opt_as(const json& j, const char* key, T def) {
  return j.contains(key) ? get_as<T>(j, key) : def;
}

inline PhysConfig parse_physics(const json& j) {
  only_keys(j, {"hbar", "a", "N", "n_range", "M_range", "quad_points"}, "physics");
  PhysConfig c;
  c.hbar = opt_as<double>(j, "hbar", 1.0);
  c.a = opt_as<double>(j, "a", 1.0);
  c.N = opt_as<int>(j, "N", 3);
  c.n_range = j.contains("n_range") ? parse_range(j.at("n_range"), "n_range") : IntRange{-8, 7};
  c.M_range = j.contains("M_range") ? parse_range(j.at("M_range"), "M_range") : IntRange{-8, 7};
  c.quad_points = opt_as<int>(j, "quad_points", 16);
  c.validate();
  return c;
}

inline BathParams parse_bath(const json& j) {
  only_keys(j, {"mass", "gamma", "kT"}, "bath");
  BathParams b{get_as<double>(j, "mass"), get_as<double>(j, "gamma"), get_as<double>(j, "kT")};
  b.validate();
  return b;
}

inline StateSpec parse_state(const json& j) {
  StateSpec s;
  const auto kind = get_as<std::string>(j, "kind");
  if (kind == "gaussian") {
    only_keys(j, {"kind", "q0", "p0", "var_x", "var_p", "cov"}, "state");
    s.kind = StateSpec::Kind::Gaussian;
    s.q0 = opt_as<double>(j, "q0", 0.0);
    s.p0 = opt_as<double>(j, "p0", 0.0);
    s.var_x = get_as<double>(j, "var_x");
    s.var_p = get_as<double>(j, "var_p");
    s.cov = opt_as<double>(j, "cov", 0.0);
  } else if (kind == "broad_gaussian") {
    only_keys(j, {"kind", "q0", "p0", "cells_x", "cells_p", "cov"}, "state");
    s.kind = StateSpec::Kind::BroadGaussian;
    s.q0 = opt_as<double>(j, "q0", 0.0);
    s.p0 = opt_as<double>(j, "p0", 0.0);
    s.cells_x = get_as<double>(j, "cells_x");
    s.cells_p = get_as<double>(j, "cells_p");
    s.cov = opt_as<double>(j, "cov", 0.0);
    if (!(s.cells_x > 0.0) || !(s.cells_p > 0.0)) throw ValidationError("cells_x and cells_p must be positive");
  } else if (kind == "window") {
    only_keys(j, {"kind", "n", "m"}, "state");
    s.kind = StateSpec::Kind::Window;
    s.n = get_as<std::int64_t>(j, "n");
    s.m = get_as<std::int64_t>(j, "m");
  } else if (kind == "level") {
    only_keys(j, {"kind", "K", "n", "m"}, "state");
    s.kind = StateSpec::Kind::Level;
    s.K = get_as<int>(j, "K");
    s.n = get_as<std::int64_t>(j, "n");
    s.m = get_as<std::int64_t>(j, "m");
  } else if (kind == "remainder") {
    only_keys(j, {"kind", "n", "M"}, "state");
    s.kind = StateSpec::Kind::Remainder;
    s.n = get_as<std::int64_t>(j, "n");
    s.m = get_as<std::int64_t>(j, "M");
  } else if (kind == "random") {
    only_keys(j, {"kind", "rank"}, "state");
    s.kind = StateSpec::Kind::Random;
    s.rank = opt_as<int>(j, "rank", 1);
    if (s.rank < 1) throw ValidationError("rank must be >= 1");
  } else {
    throw ValidationError("unknown state kind '" + kind + "'");
  }
  return s;
}

}  // namespace detail

inline Scenario parse_scenario(const json& j) {
  detail::only_keys(j, {"experiment", "physics", "bath", "state", "params", "output", "seed"}, "scenario");
  Scenario s;
  s.experiment = detail::get_as<std::string>(j, "experiment");
  bool known = false;
  for (const auto& e : experiment_names()) known = known || e == s.experiment;
  if (!known) throw ValidationError("unknown experiment '" + s.experiment + "'");
  s.physics = detail::parse_physics(j.contains("physics") ? j.at("physics") : json::object());
  if (j.contains("bath")) s.bath = detail::parse_bath(j.at("bath"));
  if (j.contains("state")) s.state = detail::parse_state(j.at("state"));
  if (j.contains("params")) {
    if (!j.at("params").is_object()) throw ValidationError("params must be an object");
    s.params = j.at("params");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::only_keys(o, {"dir", "format"}, "output");
    s.out_dir = detail::opt_as<std::string>(o, "dir", s.out_dir);
    s.format = detail::opt_as<std::string>(o, "format", s.format);
  }
  if (s.format != "csv" && s.format != "json") throw ValidationError("format must be csv or json");
  s.seed = detail::opt_as<std::uint64_t>(j, "seed", 0);
  return s;
}

inline Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return parse_scenario(j);
}

inline GaussianState gaussian_of(const Scenario& s) {
  const auto& c = s.physics;
  GaussianState g;
  if (s.state.kind == StateSpec::Kind::Gaussian)
    g = {s.state.q0, s.state.p0, s.state.var_x, s.state.var_p, s.state.cov, c.hbar};
  else if (s.state.kind == StateSpec::Kind::BroadGaussian)
    g = make_broad_gaussian(s.state.q0, s.state.p0, s.state.cells_x * c.a,
                            s.state.cells_p * static_cast<double>(c.cell_dim()) * c.b(), s.state.cov, c.hbar);
  else
    throw ValidationError("experiment '" + s.experiment + "' needs a gaussian or broad_gaussian state");
  g.validate();
  return g;
}

inline LatticeState lattice_of(const Scenario& s) {
  const auto& c = s.physics;
  switch (s.state.kind) {
    case StateSpec::Kind::Window: return build_window_state(c, s.state.n, s.state.m);
    case StateSpec::Kind::Level: return build_level_state(c, s.state.K, s.state.n, s.state.m);
    case StateSpec::Kind::Remainder: return build_remainder_state(c, s.state.n, s.state.m);
    default: throw ValidationError("state is not a lattice state");
  }
}

inline constexpr std::int64_t kMaxDenseDim = 4096;

/// Density matrix of a lattice or random state on the truncation.
inline WindowDensity window_density_of(const Scenario& s) {
  const auto& c = s.physics;
  WindowDensity tmp;
  tmp.cfg = c;
  if (tmp.dim() > kMaxDenseDim)
    throw ValidationError("truncation too large for a dense density matrix (" + std::to_string(tmp.dim()) + " > " +
                          std::to_string(kMaxDenseDim) + ")");
  if (s.state.is_lattice()) return WindowDensity::pure(c, lattice_of(s));
  if (s.state.kind != StateSpec::Kind::Random) throw ValidationError("state has no dense form");
  WindowDensity d(c);
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  double wsum = 0.0;
  std::vector<double> w(static_cast<std::size_t>(s.state.rank));
  for (auto& x : w) wsum += (x = ud(rng) + 1e-3);
  for (int r = 0; r < s.state.rank; ++r) {
    Eigen::VectorXcd v(d.dim());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = {nd(rng), nd(rng)};
    v.normalize();
    d.R += (w[static_cast<std::size_t>(r)] / wsum) * v * v.adjoint();
  }
  return d;
}

}  // namespace phasecell
