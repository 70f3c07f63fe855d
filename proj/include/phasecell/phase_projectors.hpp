#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <vector>

#include "phasecell/cell_traces.hpp"
#include "phasecell/lattice_states.hpp"

namespace phasecell {

/// Rank 2^N - 1 projector of a macro-cell, stored as identity minus the
/// remainder state.
struct CellProjector {
  int N = 1;
  CellIndex cell;
  LatticeState complement;
  double p_offset = 0.0;  // spectral recentering, in units of 2 pi hbar / a

  std::int64_t dim() const { return ipow2(N); }
  std::int64_t trace() const { return dim() - 1; }
  std::int64_t m_lo() const { return cell.M * dim(); }
};

inline CellProjector build_cell_projector(const PhysConfig& cfg, std::int64_t n, std::int64_t M) {
  if (!cfg.M_range.contains(M)) throw TruncationError("macro cell M outside truncation");
  CellProjector E;
  E.N = cfg.N;
  E.cell = {n, M};
  E.complement = build_remainder_state(cfg, n, M);
  return E;
}

/// Dense 2^N x 2^N matrix on the window states of the cell.
inline Eigen::MatrixXcd projector_matrix(const CellProjector& E) {
  const auto& c = E.complement.coeffs;
  return Eigen::MatrixXcd::Identity(E.dim(), E.dim()) - c * c.adjoint();
}

/// E applied to a state; components outside the cell are dropped.
inline LatticeState apply_projector(const CellProjector& E, const LatticeState& s) {
  LatticeState out;
  out.cell_n = E.cell.n;
  out.m_offset = E.m_lo();
  out.coeffs = Eigen::VectorXcd::Zero(E.dim());
  out.label = {StateLabel::Kind::Window, 0, out.m_offset};
  if (s.cell_n != E.cell.n) return out;
  for (std::int64_t j = 0; j < E.dim(); ++j) out.coeffs(j) = s.coeff(E.m_lo() + j);
  const cplx ov = E.complement.coeffs.dot(out.coeffs);
  out.coeffs -= ov * E.complement.coeffs;
  return out;
}

inline CellProjector shifted_projector(const PhysConfig& cfg, const CellProjector& E,
                                       std::int64_t dn, std::int64_t dM) {
  CellProjector F = E;
  F.cell = {E.cell.n + dn, E.cell.M + dM};
  F.complement = shift_state(cfg, E.complement, dn, dM);
  return F;
}

struct ProjectorMoments {
  double mean_x = 0.0;
  double var_x = 0.0;
  double mean_p = 0.0;      // absolute
  double mean_p_rel = 0.0;  // relative to the cell label P_M + offset
  double var_p = 0.0;
  double var_p_leading = 0.0;  // 2^{N+1} pi^2 hbar^2 / (3 a^2)
};

/// Moments of E / Tr E treated as a density operator.
inline ProjectorMoments projector_moments(const PhysConfig& cfg, const CellProjector& E) {
  const auto D = E.dim();
  const double tr = static_cast<double>(E.trace());
  const auto& chi = E.complement.coeffs;
  const Eigen::MatrixXcd X2 = x2_local_matrix(cfg.a, D);
  const double x2 = (static_cast<double>(D) * cfg.a * cfg.a / 12.0 - chi.dot(X2 * chi).real()) / tr;
  const Eigen::MatrixXcd X1 = x_local_matrix(cfg.a, D);
  const double x1 = (0.0 - chi.dot(X1 * chi).real()) / tr;
  double p1 = 0.0, p2 = 0.0;
  for (std::int64_t j = 0; j < D; ++j) {
    const double w = 1.0 - std::norm(chi(j));
    const double p = cfg.b() * static_cast<double>(E.m_lo() + j);
    p1 += w * p;
    p2 += w * p * p;
  }
  p1 /= tr;
  p2 /= tr;
  ProjectorMoments m;
  m.mean_x = cfg.X(E.cell.n) + x1;
  m.var_x = x2 - x1 * x1;
  m.mean_p = p1;
  m.mean_p_rel = p1 - (cfg.P(E.cell.M) + E.p_offset * cfg.b());
  m.var_p = p2 - p1 * p1;
  m.var_p_leading = std::pow(2.0, cfg.N + 1) * std::numbers::pi * std::numbers::pi *
                    cfg.hbar * cfg.hbar / (3.0 * cfg.a * cfg.a);
  return m;
}

/// Offset (units of b) that centres the projector's momentum on its label.
inline double recentering_offset(int N) { return std::pow(2.0, N - 1) - 0.5; }

inline CellProjector recenter(const PhysConfig& cfg, const CellProjector& E) {
  CellProjector F = E;
  F.p_offset = 0.0;
  const auto m = projector_moments(cfg, F);
  F.p_offset = (m.mean_p - cfg.P(E.cell.M)) / cfg.b();
  return F;
}

struct BalianLowReport {
  cplx trace_E_commutator = 0.0;  // Tr(E [x, p])
  cplx chi_channel = 0.0;         // <chi|[x, p]|chi>
  cplx block_total = 0.0;         // trace over all 2^N states of the cell
  double trace_E = 0.0;
  cplx expected = 0.0;  // i hbar Tr E
};

/// Tr(E[x, p]) with x and p restricted to the window states of the cell.
/// Level states vanish at the cell edges, so the restriction is exact for
/// them.
inline BalianLowReport balian_low_diagnostic(const PhysConfig& cfg, const CellProjector& E) {
  const auto D = E.dim();
  const Eigen::MatrixXcd X = x_local_matrix(cfg.a, D);
  Eigen::VectorXcd p(D);
  for (std::int64_t j = 0; j < D; ++j) p(j) = cfg.b() * static_cast<double>(E.m_lo() + j);
  const Eigen::MatrixXcd C = X * p.asDiagonal() - p.asDiagonal() * X;
  const Eigen::MatrixXcd P = projector_matrix(E);
  BalianLowReport r;
  r.trace_E_commutator = (P * C).trace();
  r.chi_channel = E.complement.coeffs.dot(C * E.complement.coeffs);
  r.block_total = C.trace();
  r.trace_E = static_cast<double>(E.trace());
  r.expected = cplx(0.0, cfg.hbar * r.trace_E);
  return r;
}

/// Union of macro-cells and its projector E_Gamma.
struct RegionProjector {
  std::set<std::pair<std::int64_t, std::int64_t>> cells;

  bool contains(std::int64_t n, std::int64_t M) const { return cells.count({n, M}) > 0; }

  static RegionProjector rectangle(IntRange n, IntRange M) {
    RegionProjector r;
    for (auto i = n.lo; i <= n.hi; ++i)
      for (auto j = M.lo; j <= M.hi; ++j) r.cells.insert({i, j});
    return r;
  }
};

struct RegionProbability {
  double inside = 0.0;      // Tr(E_Gamma rho)
  double complement = 0.0;  // Tr((1 - E_Gamma) rho) for unit-trace rho
};

inline RegionProbability region_probability(const CellTraceTable& t, const RegionProjector& r) {
  double s = 0.0;
  for (const auto& [n, M] : r.cells) s += t.at(n, M).prob();
  return {s, 1.0 - s};
}

struct DeficitReport {
  double deficit = 0.0;   // 1 - sum over cells of Tr(E rho)
  double chi_sum = 0.0;   // remainder channel
  double leakage = 0.0;   // trace not captured by the truncated window basis
  double tail_mass = 0.0; // density mass outside the truncation rectangle
};

inline DeficitReport exhaustivity_deficit(const CellTraceTable& t) {
  DeficitReport d;
  d.chi_sum = t.sum_chi();
  d.leakage = t.rho.trace - t.sum_block();
  d.deficit = t.rho.trace - t.sum_prob();
  d.tail_mass = t.tail_mass;
  return d;
}

}  // namespace phasecell
