#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "phasecell/audits.hpp"
#include "phasecell/classical_pair.hpp"
#include "phasecell/grid_io.hpp"
#include "phasecell/json_io.hpp"
#include "phasecell/master_equation.hpp"
#include "phasecell/scenario.hpp"

namespace phasecell {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitTolerance = 3;

struct RunResult {
  int exit_code = kExitOk;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  json summary = json::object();
};

/// Exit code for a library error.
inline int exit_code_for(const Error& e) {
  const std::string k = e.kind();
  if (k == "GridTooCoarse" || k == "DomainOverflow" || k == "TruncationLeak" || k == "DivergentMoment")
    return kExitTolerance;
  return kExitValidation;
}

inline json error_json(const std::string& kind, const std::string& message) {
  return {{"error", kind}, {"message", message}};
}

/// Truncation holding +-`sigmas` standard deviations of a Gaussian.
inline PhysConfig covering_truncation(PhysConfig c, const GaussianState& g, double sigmas = 13.0) {
  const double sx = std::sqrt(g.var_x), sp = std::sqrt(g.var_p);
  const double P = static_cast<double>(c.cell_dim()) * c.b();
  c.n_range = {static_cast<std::int64_t>(std::floor((g.q0 - sigmas * sx) / c.a)),
               static_cast<std::int64_t>(std::ceil((g.q0 + sigmas * sx) / c.a))};
  c.M_range = {static_cast<std::int64_t>(std::floor((g.p0 - sigmas * sp) / P)) - 1,
               static_cast<std::int64_t>(std::ceil((g.p0 + sigmas * sp) / P))};
  return c;
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("slope fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  return sxy / sxx;
}

namespace detail {


inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void check_params(const Scenario& s, std::initializer_list<const char*> keys) {
  only_keys(s.params, keys, "params of '" + s.experiment + "'");
}

inline std::string describe(const GaussianState& g) {
  return "gaussian q0=" + fmt17(g.q0) + " p0=" + fmt17(g.p0) + " var_x=" + fmt17(g.var_x) +
         " var_p=" + fmt17(g.var_p) + " cov=" + fmt17(g.cov);
}

inline std::string describe(const Scenario& s) {
  switch (s.state.kind) {
    case StateSpec::Kind::Window:
      return "window n=" + std::to_string(s.state.n) + " m=" + std::to_string(s.state.m);
    case StateSpec::Kind::Level:
      return "level K=" + std::to_string(s.state.K) + " n=" + std::to_string(s.state.n) +
             " m=" + std::to_string(s.state.m);
    case StateSpec::Kind::Remainder:
      return "remainder n=" + std::to_string(s.state.n) + " M=" + std::to_string(s.state.m);
    case StateSpec::Kind::Random:
      return "random rank=" + std::to_string(s.state.rank) + " seed=" + std::to_string(s.seed);
    default: return describe(gaussian_of(s));
  }
}

/// Trace table of the scenario state.
inline CellTraceTable table_of(const Scenario& s, TraceOptions opt) {
  if (s.state.is_gaussian()) return cell_traces(s.physics, gaussian_of(s), opt);
  if (s.state.kind == StateSpec::Kind::None) throw ValidationError("experiment '" + s.experiment + "' needs a state");
  return cell_traces(window_density_of(s), opt);
}

inline std::string key_value_csv(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string out = "key,value\n";
  for (const auto& [k, v] : rows) out += k + "," + v + "\n";
  return out;
}

inline std::vector<std::pair<std::string, std::string>> audit_rows(const AuditReport& r) {
  std::vector<std::pair<std::string, std::string>> rows{{"check", r.check},
                                                        {"measured", fmt17(r.measured)},
                                                        {"predicted", fmt17(r.predicted)},
                                                        {"tolerance", fmt17(r.tolerance)},
                                                        {"within_tolerance", r.within_tolerance() ? "1" : "0"}};
  for (std::size_t K = 0; K < r.per_level.size(); ++K)
    rows.emplace_back("level_" + std::to_string(K + 1), fmt17(r.per_level[K]));
  for (const auto& c : r.conditions) {
    rows.emplace_back("condition_" + c.name, fmt17(c.value));
    rows.emplace_back("condition_" + c.name + "_satisfied", c.satisfied ? "1" : "0");
  }
  for (const auto& [k, v] : r.details) rows.emplace_back(k, fmt17(v));
  return rows;
}

inline RunResult run_states(const Scenario& s) {
  check_params(s, {"n", "M"});
  const auto& c = s.physics;
  if (c.N > 12) throw ValidationError("states output is limited to N <= 12");
  const auto n = opt_as<std::int64_t>(s.params, "n", 0), M = opt_as<std::int64_t>(s.params, "M", 0);
  std::vector<LatticeState> states;
  for (int K = 1; K <= c.N; ++K)
    for (auto m = M * ipow2(c.N - K); m < (M + 1) * ipow2(c.N - K); ++m) states.push_back(build_level_state(c, K, n, m));
  states.push_back(build_remainder_state(c, n, M));
  const auto D = c.cell_dim();
  Eigen::MatrixXcd V = Eigen::MatrixXcd::Zero(D, static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i)
    for (Eigen::Index j = 0; j < states[i].coeffs.size(); ++j)
      V(states[i].m_offset - M * D + j, static_cast<Eigen::Index>(i)) = states[i].coeffs(j);
  const auto I = Eigen::MatrixXcd::Identity(D, D);
  const double ortho = (V.adjoint() * V - I).cwiseAbs().maxCoeff();
  const double compl_err = (V * V.adjoint() - I).cwiseAbs().maxCoeff();
  RunResult r;
  r.exit_code = std::max(ortho, compl_err) <= 1e-12 ? kExitOk : kExitTolerance;
  r.summary = {{"orthonormality_error", ortho}, {"completeness_error", compl_err}, {"count", states.size()}};
  if (s.format == "json") {
    json arr = json::array();
    for (const auto& st : states) arr.push_back(to_json(st));
    r.files.emplace_back("states.json", dump({{"N", c.N},
                                               {"cell", {{"n", n}, {"M", M}}},
                                               {"states", arr},
                                               {"checks", r.summary}}));
  } else {
    std::string out = "kind,K,m,window_index,re,im\n";
    for (const auto& st : states)
      for (Eigen::Index j = 0; j < st.coeffs.size(); ++j)
        out += to_string(st.label.kind) + "," + std::to_string(st.label.K) + "," + std::to_string(st.label.m) + "," +
               std::to_string(st.m_offset + j) + "," + fmt17(st.coeffs(j).real()) + "," + fmt17(st.coeffs(j).imag()) +
               "\n";
    r.files.emplace_back("states.csv", out);
  }
  return r;
}

inline RunResult run_projector(const Scenario& s) {
  check_params(s, {"n", "M", "recentered"});
  const auto& c = s.physics;
  if (c.N > 10) throw ValidationError("projector output is limited to N <= 10");
  const auto n = opt_as<std::int64_t>(s.params, "n", 0), M = opt_as<std::int64_t>(s.params, "M", 0);
  auto E = build_cell_projector(c, n, M);
  if (opt_as<bool>(s.params, "recentered", true)) E = recenter(c, E);
  const auto P = projector_matrix(E);
  const double idem = (P * P - P).cwiseAbs().maxCoeff();
  const auto mom = projector_moments(c, E);
  const auto bl = balian_low_diagnostic(c, E);
  RunResult r;
  r.exit_code = idem <= 1e-12 ? kExitOk : kExitTolerance;
  r.summary = {{"trace", P.trace().real()},
               {"idempotence_error", idem},
               {"var_x", mom.var_x},
               {"var_p", mom.var_p},
               {"var_p_leading", mom.var_p_leading},
               {"mean_p_relative", mom.mean_p_rel},
               {"commutator_trace_im", bl.trace_E_commutator.imag()},
               {"commutator_trace_expected_im", bl.expected.imag()}};
  if (s.format == "json") {
    auto j = to_json(E);
    j["diagnostics"] = r.summary;
    r.files.emplace_back("projector.json", dump(j));
  } else {
    std::string out = "i,j,re,im\n";
    for (Eigen::Index i = 0; i < P.rows(); ++i)
      for (Eigen::Index k = 0; k < P.cols(); ++k)
        out += std::to_string(i) + "," + std::to_string(k) + "," + fmt17(P(i, k).real()) + "," +
               fmt17(P(i, k).imag()) + "\n";
    r.files.emplace_back("projector.csv", out);
  }
  return r;
}

inline RunResult run_evolve(const Scenario& s) {
  check_params(s, {"t", "steps", "nq", "np", "var_q_tolerance", "var_p_tolerance"});
  if (!s.bath) throw ValidationError("evolve needs a bath");
  const auto g = gaussian_of(s);
  const double t = get_as<double>(s.params, "t");
  const auto in = master_grid(g, *s.bath, t, opt_as<std::int64_t>(s.params, "nq", 256),
                              opt_as<std::int64_t>(s.params, "np", 256));
  const auto out = evolve_master(in, *s.bath, t, opt_as<int>(s.params, "steps", 200));
  const auto got = phase_moments(out), want = predicted_moments(g, *s.bath, t);
  const double eq = std::abs(got.var_q / want.var_q - 1.0), ep = std::abs(got.var_p / want.var_p - 1.0);
  const double tq = opt_as<double>(s.params, "var_q_tolerance", 0.01), tp = opt_as<double>(s.params, "var_p_tolerance", 0.001);
  RunResult r;
  r.exit_code = (eq <= tq && ep <= tp) ? kExitOk : kExitTolerance;
  r.summary = {{"check", "moment_laws"},
               {"t", t},
               {"measured", to_json(got)},
               {"predicted", to_json(want)},
               {"relative_error", {{"var_q", eq}, {"var_p", ep}}},
               {"tolerance", {{"var_q", tq}, {"var_p", tp}}}};
  std::ostringstream grid;
  if (s.format == "json") {
    r.files.emplace_back("evolve.json", dump(r.summary));
    write_grid_binary(grid, out);
    r.files.emplace_back("wigner.bin", grid.str());
  } else {
    write_grid_csv(grid, out);
    r.files.emplace_back("wigner.csv", grid.str());
    std::string m = "quantity,measured,predicted\n";
    for (const char* k : {"norm", "mean_q", "mean_p", "var_q", "var_p", "cov"})
      m += std::string(k) + "," + fmt17(r.summary["measured"][k].get<double>()) + "," +
           fmt17(r.summary["predicted"][k].get<double>()) + "\n";
    r.files.emplace_back("moments.csv", m);
  }
  return r;
}

inline std::string closeness_csv_header() {
  return "N,C_measured,C_predicted,headline_x,headline_p,full_x,full_p,d2_x,d2_p,var_x_projector,var_p_projector\n";
}

inline std::string closeness_csv_row(const ClosenessReport& c) {
  return std::to_string(c.N) + "," + fmt17(c.C_measured) + "," + fmt17(c.C_predicted) + "," +
         fmt17(c.norms.x.headline) + "," + fmt17(c.norms.p.headline) + "," + fmt17(c.norms.x.full) + "," +
         fmt17(c.norms.p.full) + "," + fmt17(c.norms.x.d2) + "," + fmt17(c.norms.p.d2) + "," + fmt17(c.var_x_E) +
         "," + fmt17(c.var_p_E) + "\n";
}

inline RunResult run_closeness(const Scenario& s) {
  check_params(s, {"recentered"});
  const auto pair = build_pair(s.physics, opt_as<bool>(s.params, "recentered", true));
  const auto rep = closeness_product(pair, table_of(s, {true, true, false}), describe(s));
  RunResult r;
  r.summary = to_json(rep);
  if (s.format == "json")
    r.files.emplace_back("closeness.json", dump(r.summary));
  else
    r.files.emplace_back("closeness.csv", closeness_csv_header() + closeness_csv_row(rep));
  return r;
}

inline IntervalSpec parse_interval(const PhysConfig& c, const json& j) {
  only_keys(j, {"axis", "n", "M"}, "interval");
  const auto ax = get_as<std::string>(j, "axis");
  IntervalSpec iv;
  if (ax == "x") iv.axis = IntervalAxis::X;
  else if (ax == "p") iv.axis = IntervalAxis::P;
  else if (ax == "joint") iv.axis = IntervalAxis::Joint;
  else throw ValidationError("interval axis must be x, p or joint");
  iv.n = j.contains("n") ? parse_range(j.at("n"), "interval n") : c.n_range;
  iv.M = j.contains("M") ? parse_range(j.at("M"), "interval M") : c.M_range;
  if (iv.axis == IntervalAxis::X && (iv.M.lo != c.M_range.lo || iv.M.hi != c.M_range.hi))
    throw ValidationError("an x interval spans every momentum cell of the truncation");
  if (iv.axis == IntervalAxis::P && (iv.n.lo != c.n_range.lo || iv.n.hi != c.n_range.hi))
    throw ValidationError("a p interval spans every position cell of the truncation");
  iv.validate(c);
  return iv;
}

inline RunResult run_probabilities(const Scenario& s) {
  check_params(s, {"intervals", "tolerance"});
  const auto& c = s.physics;
  const auto t = table_of(s, {});
  std::vector<IntervalSpec> ivs;
  if (s.params.contains("intervals")) {
    if (!s.params.at("intervals").is_array()) throw ValidationError("intervals must be an array");
    for (const auto& j : s.params.at("intervals")) ivs.push_back(parse_interval(c, j));
  }
  if (!ivs.empty() && !s.state.is_gaussian())
    throw ValidationError("interval comparisons need a gaussian state for the canonical marginals");
  const double tol = opt_as<double>(s.params, "tolerance", 0.01);
  std::vector<IntervalProbability> res;
  RunResult r;
  for (const auto& iv : ivs) {
    res.push_back(interval_probability(t, iv, gaussian_marginals(gaussian_of(s)), tol));
    const auto& a = res.back().report;
    if (a.conditions_hold() && !a.within_tolerance()) r.exit_code = kExitTolerance;
  }
  const auto def = exhaustivity_deficit(t);
  r.summary = {{"cells", t.cells.size()}, {"sum", t.sum_prob()}, {"deficit", def.deficit}, {"intervals", res.size()}};
  if (s.format == "json") {
    json cells = json::array(), jiv = json::array();
    t.for_each([&](std::int64_t n, std::int64_t M, const CellForms& f) {
      cells.push_back({{"n", n}, {"M", M}, {"p_nM", f.prob()}});
    });
    for (const auto& x : res) {
      auto j = to_json(x.report);
      j["complement"] = x.complement;
      jiv.push_back(j);
    }
    r.files.emplace_back("probabilities.json", dump({{"summary", r.summary}, {"cells", cells}, {"intervals", jiv}}));
  } else {
    std::ostringstream os;
    write_probability_csv(os, t);
    r.files.emplace_back("probabilities.csv", os.str());
    std::string out = "axis,n_lo,n_hi,M_lo,M_hi,x_lo,x_hi,p_lo,p_hi,measured,predicted,complement,conditions_hold\n";
    for (std::size_t i = 0; i < res.size(); ++i) {
      const auto& iv = ivs[i];
      const auto& a = res[i].report;
      out += std::string(to_string(iv.axis)) + "," + std::to_string(iv.n.lo) + "," + std::to_string(iv.n.hi) + "," +
             std::to_string(iv.M.lo) + "," + std::to_string(iv.M.hi) + "," + fmt17(iv.x_lo(c)) + "," +
             fmt17(iv.x_hi(c)) + "," + fmt17(iv.p_lo(c)) + "," + fmt17(iv.p_hi(c)) + "," + fmt17(a.measured) + "," +
             fmt17(a.predicted) + "," + fmt17(res[i].complement) + "," + (a.conditions_hold() ? "1" : "0") + "\n";
    }
    if (!res.empty()) r.files.emplace_back("intervals.csv", out);
  }
  return r;
}

inline RunResult run_audit(const Scenario& s) {
  check_params(s, {"check", "tolerance", "budget", "probe", "omega"});
  const auto check = opt_as<std::string>(s.params, "check", "completeness");
  RunResult r;
  std::vector<std::pair<std::string, std::string>> rows;
  if (check == "completeness") {
    const auto t = table_of(s, {false, false, true});
    const auto a = completeness_audit(t, opt_as<double>(s.params, "tolerance", 0.005), opt_as<double>(s.params, "budget", 1e-6));
    r.exit_code = a.within_tolerance() ? kExitOk : kExitTolerance;
    r.summary = to_json(a);
    rows = audit_rows(a);
  } else if (check == "resolution") {
    Scenario ps = s;
    ps.state = parse_state(require(s.params, "probe"));
    if (!ps.state.is_lattice()) throw ValidationError("probe must be a window, level or remainder state");
    const auto a = resolution_identity_check(s.physics, gaussian_of(s), lattice_of(ps));
    const double tol = opt_as<double>(s.params, "tolerance", 0.01);
    const bool ok = std::abs(a.measured / a.predicted - 1.0) <= tol && std::abs(a.continuum / a.probe_norm - 1.0) <= 1e-4;
    r.exit_code = ok ? kExitOk : kExitTolerance;
    r.summary = to_json(a);
    r.summary["tolerance"] = tol;
    rows = {{"check", "resolution_identity"},
            {"measured", fmt17(a.measured)},
            {"predicted", fmt17(a.predicted)},
            {"continuum", fmt17(a.continuum)},
            {"continuum_tail", fmt17(a.continuum_tail)}};
    for (std::size_t K = 0; K < a.per_level.size(); ++K)
      rows.emplace_back("level_" + std::to_string(K + 1), fmt17(a.per_level[K]));
  } else if (check == "validity") {
    const auto& c = s.physics;
    std::vector<Condition> conds;
    if (s.state.kind != StateSpec::Kind::None)
      conds = validity_conditions(table_of(s, {}), {IntervalAxis::Joint, c.n_range, c.M_range});
    json jc = json::array();
    for (const auto& x : conds) {
      jc.push_back(to_json(x));
      rows.emplace_back("condition_" + x.name, fmt17(x.value));
      rows.emplace_back("condition_" + x.name + "_satisfied", x.satisfied ? "1" : "0");
    }
    r.summary = {{"check", "validity"}, {"conditions", jc}};
    if (s.bath) {
      const double tb = decoherence_time_bound(c.N, s.bath->gamma, s.bath->kT, c.hbar);
      r.summary["decoherence_time_bound"] = tb;
      rows.emplace_back("decoherence_time_bound", fmt17(tb));
      if (s.params.contains("omega")) {
        const double tr = thermal_ratio(c.N, s.bath->kT, get_as<double>(s.params, "omega"), c.hbar);
        r.summary["thermal_ratio"] = tr;
        rows.emplace_back("thermal_ratio", fmt17(tr));
      }
    } else if (s.params.contains("omega")) {
      throw ValidationError("omega needs a bath temperature");
    }
  } else {
    throw ValidationError("audit check must be completeness, resolution or validity");
  }
  if (s.format == "json")
    r.files.emplace_back("audit.json", dump(r.summary));
  else
    r.files.emplace_back("audit.csv", key_value_csv(rows));
  return r;
}

inline RunResult run_regime(const Scenario& s) {
  check_params(s, {"dx", "dv", "mass", "hbar"});
  const double dx = get_as<double>(s.params, "dx"), dv = get_as<double>(s.params, "dv"),
               m = get_as<double>(s.params, "mass"), hb = opt_as<double>(s.params, "hbar", 1.054571817e-34);
  const double ratio = regime_estimate(dx, dv, m, hb);
  RunResult r;
  r.summary = {{"check", "regime"}, {"dx", dx}, {"dv", dv}, {"mass", m}, {"hbar", hb}, {"ratio", ratio}};
  if (s.format == "json")
    r.files.emplace_back("regime.json", dump(r.summary));
  else
    r.files.emplace_back("regime.csv", "dx,dv,mass,hbar,ratio\n" + fmt17(dx) + "," + fmt17(dv) + "," + fmt17(m) + "," +
                                           fmt17(hb) + "," + fmt17(ratio) + "\n");
  return r;
}

inline RunResult run_scaling(const Scenario& s) {
  check_params(s, {"N_values", "cells_x", "cells_p", "slope_target", "slope_tolerance"});
  std::vector<int> Ns{2, 3, 4, 5, 6, 7, 8};
  if (s.params.contains("N_values")) {
    const auto& a = s.params.at("N_values");
    if (!a.is_array() || a.size() < 2) throw ValidationError("N_values must list at least two depths");
    Ns.clear();
    for (const auto& v : a) {
      if (!v.is_number_integer()) throw ValidationError("N_values must be integers");
      Ns.push_back(v.get<int>());
    }
  }
  const double cx = opt_as<double>(s.params, "cells_x", 4.0), cp = opt_as<double>(s.params, "cells_p", 4.0);
  const double target = opt_as<double>(s.params, "slope_target", 0.5), tol = opt_as<double>(s.params, "slope_tolerance", 0.05);
  std::vector<ClosenessReport> reps;
  std::vector<double> xs, ys;
  for (int N : Ns) {
    PhysConfig c = s.physics;
    c.N = N;
    c.validate();
    const auto g = make_broad_gaussian(0.0, 0.0, cx * c.a, cp * static_cast<double>(c.cell_dim()) * c.b(), 0.0, c.hbar);
    c = covering_truncation(c, g);
    reps.push_back(closeness_product(build_pair(c), g, describe(g)));
    xs.push_back(N);
    ys.push_back(std::log2(reps.back().C_measured));
  }
  const double slope = fit_slope(xs, ys);
  RunResult r;
  r.exit_code = std::abs(slope - target) <= tol ? kExitOk : kExitTolerance;
  json rows = json::array();
  for (const auto& x : reps) rows.push_back(to_json(x));
  r.summary = {{"check", "closeness_scaling"},
               {"measured", slope},
               {"predicted", target},
               {"tolerance", tol},
               {"within_tolerance", r.exit_code == kExitOk},
               {"C_predicted_N20", closeness_predicted(20)}};
  if (s.format == "json") {
    auto j = r.summary;
    j["reports"] = rows;
    r.files.emplace_back("scaling.json", dump(j));
  } else {
    std::string out = closeness_csv_header();
    for (const auto& x : reps) out += closeness_csv_row(x);
    r.files.emplace_back("scaling.csv", out);
    r.files.emplace_back("scaling_fit.csv", "slope,target,tolerance\n" + fmt17(slope) + "," + fmt17(target) + "," +
                                                fmt17(tol) + "\n");
  }
  return r;
}

}  // namespace detail

/// Runs a scenario; library errors propagate to the caller.
inline RunResult run(const Scenario& s) {
  RunResult r;
  if (s.experiment == "states") r = detail::run_states(s);
  else if (s.experiment == "projector") r = detail::run_projector(s);
  else if (s.experiment == "evolve") r = detail::run_evolve(s);
  else if (s.experiment == "closeness") r = detail::run_closeness(s);
  else if (s.experiment == "probabilities") r = detail::run_probabilities(s);
  else if (s.experiment == "audit") r = detail::run_audit(s);
  else if (s.experiment == "regime") r = detail::run_regime(s);
  else if (s.experiment == "scaling") r = detail::run_scaling(s);
  else throw ValidationError("unknown experiment '" + s.experiment + "'");
  json files = json::array();
  for (const auto& f : r.files) files.push_back(f.first);
  r.summary = {{"experiment", s.experiment}, {"exit_code", r.exit_code}, {"files", files}, {"result", r.summary}};
  return r;
}

}  // namespace phasecell
