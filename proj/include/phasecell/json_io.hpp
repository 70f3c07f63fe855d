#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <type_traits>

#include "phasecell/audits.hpp"
#include "phasecell/classical_pair.hpp"
#include "phasecell/lattice_states.hpp"
#include "phasecell/master_equation.hpp"
#include "phasecell/phase_projectors.hpp"

namespace phasecell {

using json = nlohmann::ordered_json;

inline StateLabel::Kind parse_state_kind(const std::string& s) {
  if (s == "window") return StateLabel::Kind::Window;
  if (s == "level") return StateLabel::Kind::Level;
  if (s == "remainder") return StateLabel::Kind::Remainder;
  throw ValidationError("unknown state label kind '" + s + "'");
}

namespace detail {

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing key '") + key + "'");
  return j.at(key);
}

inline void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* allowed : keys) ok = ok || k == allowed;
    if (!ok) throw ValidationError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
T get_as(const json& j, const char* key) {
  const auto& v = require(j, key);
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0))
      throw ValidationError(std::string("'") + key + "' must be an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ValidationError(std::string("'") + key + "' must be a number");
  }
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline json to_json(const StateLabel& l) {
  return {{"kind", to_string(l.kind)}, {"K", l.K}, {"m", l.m}};
}

inline json to_json(const LatticeState& s) {
  json c = json::array();
  for (Eigen::Index j = 0; j < s.coeffs.size(); ++j) c.push_back({s.coeffs(j).real(), s.coeffs(j).imag()});
  return {{"cell_n", s.cell_n}, {"m_offset", s.m_offset}, {"coeffs", c}, {"label", to_json(s.label)}};
}

inline LatticeState lattice_state_from_json(const json& j) {
  detail::only_keys(j, {"cell_n", "m_offset", "coeffs", "label"}, "lattice state");
  LatticeState s;
  s.cell_n = detail::get_as<std::int64_t>(j, "cell_n");
  s.m_offset = detail::get_as<std::int64_t>(j, "m_offset");
  const auto& c = detail::require(j, "coeffs");
  if (!c.is_array() || c.empty()) throw ValidationError("coeffs must be a nonempty array");
  s.coeffs.resize(static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c[i].is_array() || c[i].size() != 2 || !c[i][0].is_number() || !c[i][1].is_number())
      throw ValidationError("each coefficient must be [re, im]");
    s.coeffs(static_cast<Eigen::Index>(i)) = {c[i][0].get<double>(), c[i][1].get<double>()};
  }
  if (j.contains("label")) {
    const auto& l = j.at("label");
    detail::only_keys(l, {"kind", "K", "m"}, "state label");
    s.label.kind = parse_state_kind(detail::get_as<std::string>(l, "kind"));
    s.label.K = detail::get_as<int>(l, "K");
    s.label.m = detail::get_as<std::int64_t>(l, "m");
  }
  return s;
}

inline json to_json(const CellProjector& E) {
  return {{"N", E.N},
          {"cell", {{"n", E.cell.n}, {"M", E.cell.M}}},
          {"complement_state", to_json(E.complement)},
          {"p_offset", E.p_offset}};
}

inline CellProjector cell_projector_from_json(const json& j) {
  detail::only_keys(j, {"N", "cell", "complement_state", "p_offset"}, "cell projector");
  CellProjector E;
  E.N = detail::get_as<int>(j, "N");
  if (E.N < 1 || E.N > 24) throw ValidationError("N must lie in [1, 24]");
  const auto& c = detail::require(j, "cell");
  detail::only_keys(c, {"n", "M"}, "cell");
  E.cell = {detail::get_as<std::int64_t>(c, "n"), detail::get_as<std::int64_t>(c, "M")};
  E.complement = lattice_state_from_json(detail::require(j, "complement_state"));
  E.p_offset = detail::get_as<double>(j, "p_offset");
  if (E.complement.coeffs.size() != E.dim() || E.complement.m_offset != E.m_lo() || E.complement.cell_n != E.cell.n)
    throw ValidationError("complement state does not span the cell's window states");
  if (std::abs(E.complement.coeffs.squaredNorm() - 1.0) > 1e-12) throw ValidationError("complement state not normalized");
  return E;
}

inline json to_json(const Condition& c) {
  return {{"name", c.name}, {"satisfied", c.satisfied}, {"value", c.value}, {"threshold", c.threshold},
          {"margin", c.margin}};
}

inline json to_json(const AuditReport& r) {
  json conds = json::array(), det = json::object();
  for (const auto& c : r.conditions) conds.push_back(to_json(c));
  for (const auto& [k, v] : r.details) det[k] = v;
  return {{"check", r.check},         {"measured", r.measured},
          {"predicted", r.predicted}, {"tolerance", r.tolerance},
          {"within_tolerance", r.within_tolerance()},
          {"per_level", r.per_level}, {"conditions", conds},
          {"details", det}};
}

inline json to_json(const NormParts& n) {
  return {{"headline", n.headline}, {"full", n.full}, {"d2", n.d2}, {"commutator_term", n.commutator_term}};
}

inline json to_json(const ClosenessReport& r) {
  return {{"N", r.N},
          {"a", r.a},
          {"rho_descriptor", r.rho_descriptor},
          {"norms", {{"x", to_json(r.norms.x)}, {"p", to_json(r.norms.p)}, {"product", r.product}}},
          {"C_measured", r.C_measured},
          {"C_predicted", r.C_predicted},
          {"diagnostics",
           {{"hbar", r.hbar},
            {"var_x_projector", r.var_x_E},
            {"var_p_projector", r.var_p_E},
            {"var_p_projector_leading", r.var_p_E_leading},
            {"completeness_deficit", r.deficit},
            {"tail_mass", r.tail_mass}}}};
}

inline json to_json(const ResolutionIdentity& r) {
  return {{"check", "resolution_identity"}, {"measured", r.measured},     {"predicted", r.predicted},
          {"per_level", r.per_level},       {"continuum", r.continuum},   {"continuum_tail", r.continuum_tail},
          {"probe_norm", r.probe_norm}};
}

inline json to_json(const PhaseMoments& m) {
  return {{"norm", m.norm},   {"mean_q", m.mean_q}, {"mean_p", m.mean_p},
          {"var_q", m.var_q}, {"var_p", m.var_p},   {"cov", m.cov}};
}

inline json to_json(const GaussianState& g) {
  return {{"q0", g.q0}, {"p0", g.p0}, {"var_x", g.var_x}, {"var_p", g.var_p}, {"cov", g.cov}, {"hbar", g.hbar}};
}

}  // namespace phasecell
