#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "phasecell/classical_pair.hpp"
#include "phasecell/gaussian_lattice.hpp"
#include "phasecell/phase_projectors.hpp"
#include "phasecell/wigner.hpp"

namespace phasecell {

struct Condition {
  std::string name;
  bool satisfied = false;
  double value = 0.0;      // measured quantity
  double threshold = 0.0;  // pass boundary
  double margin = 0.0;     // distance from the boundary, positive when satisfied
};

struct AuditReport {
  std::string check;
  double measured = 0.0;
  double predicted = 0.0;
  double tolerance = 0.0;
  std::vector<double> per_level;  // index K-1
  std::vector<Condition> conditions;
  std::vector<std::pair<std::string, double>> details;

  bool within_tolerance() const { return std::abs(measured - predicted) <= tolerance; }
  bool conditions_hold() const {
    for (const auto& c : conditions)
      if (!c.satisfied) return false;
    return true;
  }
};

/// Thresholds of the validity conditions.
struct ValidityOptions {
  double remainder_tolerance = 0.01;  // 2^-N must stay below this
  double slow_variation = 0.25;       // max relative jump of the cell-averaged Wigner function
  double broadness = 10.0;            // interval area in units of 2^N 2 pi hbar
};

/// Canonical probabilities that the coarse-grained ones are compared with.
struct CanonicalMarginals {
  std::function<double(double, double)> x_mass;
  std::function<double(double, double)> p_mass;
  std::function<double(double, double, double, double)> joint_mass;  // Wigner mass of a rectangle
};

inline double gaussian_rectangle_mass(const GaussianState& g, double xlo, double xhi, double plo, double phi) {
  const double sx = std::sqrt(g.var_x), sp = std::sqrt(g.var_p);
  xlo = std::max(xlo, g.q0 - 12.0 * sx);
  xhi = std::min(xhi, g.q0 + 12.0 * sx);
  plo = std::max(plo, g.p0 - 12.0 * sp);
  phi = std::min(phi, g.p0 + 12.0 * sp);
  if (xlo >= xhi || plo >= phi) return 0.0;
  const int px = std::max(2, static_cast<int>(std::ceil(2.0 * (xhi - xlo) / sx)));
  const int pp = std::max(2, static_cast<int>(std::ceil(2.0 * (phi - plo) / sp)));
  std::vector<double> xn, xw, pn, pw;
  quad::composite_nodes(xlo, xhi, px, 16, xn, xw);
  quad::composite_nodes(plo, phi, pp, 16, pn, pw);
  double s = 0.0;
  for (std::size_t i = 0; i < xn.size(); ++i)
    for (std::size_t j = 0; j < pn.size(); ++j) s += xw[i] * pw[j] * g.wigner(xn[i], pn[j]);
  return s;
}

inline CanonicalMarginals gaussian_marginals(const GaussianState& g) {
  return {[g](double lo, double hi) { return g.x_mass(lo, hi); },
          [g](double lo, double hi) { return g.p_mass(lo, hi); },
          [g](double a, double b, double c, double d) { return gaussian_rectangle_mass(g, a, b, c, d); }};
}

/// Cell-averaged Wigner function, from the window-basis mass of each
/// macro-cell divided by its phase-space area.
inline std::vector<double> cell_averaged_wigner(const CellTraceTable& t) {
  const double area = static_cast<double>(t.cfg.cell_dim()) * kTwoPi * t.cfg.hbar;
  std::vector<double> w;
  w.reserve(t.cells.size());
  for (const auto& c : t.cells) w.push_back(c.block / area);
  return w;
}

/// max over adjacent macro-cells of |W_c - W_c'| / max W
inline double slow_variation_metric(const CellTraceTable& t) {
  const auto w = cell_averaged_wigner(t);
  const auto nM = t.cfg.M_range.size(), nn = t.cfg.n_range.size();
  double mx = 0.0, jump = 0.0;
  for (double v : w) mx = std::max(mx, std::abs(v));
  for (std::int64_t i = 0; i < nn; ++i)
    for (std::int64_t j = 0; j < nM; ++j) {
      const double v = w[i * nM + j];
      if (i + 1 < nn) jump = std::max(jump, std::abs(w[(i + 1) * nM + j] - v));
      if (j + 1 < nM) jump = std::max(jump, std::abs(w[i * nM + j + 1] - v));
    }
  return mx > 0.0 ? jump / mx : 0.0;
}

enum class IntervalAxis { X, P, Joint };

/// Cells [n.lo, n.hi] x [M.lo, M.hi]; for X intervals M spans the whole
/// truncation, for P intervals n does.
struct IntervalSpec {
  IntervalAxis axis = IntervalAxis::X;
  IntRange n{0, 0};
  IntRange M{0, 0};

  static IntervalSpec x_cells(const PhysConfig& c, std::int64_t lo, std::int64_t hi) {
    return {IntervalAxis::X, {lo, hi}, c.M_range};
  }
  static IntervalSpec p_cells(const PhysConfig& c, std::int64_t lo, std::int64_t hi) {
    return {IntervalAxis::P, c.n_range, {lo, hi}};
  }
  static IntervalSpec joint(std::int64_t n0, std::int64_t n1, std::int64_t M0, std::int64_t M1) {
    return {IntervalAxis::Joint, {n0, n1}, {M0, M1}};
  }
  void validate(const PhysConfig& c) const {
    if (n.lo > n.hi || M.lo > M.hi) throw ValidationError("interval bounds out of order");
    if (n.lo < c.n_range.lo || n.hi > c.n_range.hi || M.lo < c.M_range.lo || M.hi > c.M_range.hi)
      throw TruncationError("interval outside truncation");
  }
  double x_lo(const PhysConfig& c) const { return c.X(n.lo) - 0.5 * c.a; }
  double x_hi(const PhysConfig& c) const { return c.X(n.hi) + 0.5 * c.a; }
  double p_lo(const PhysConfig& c) const { return c.P(M.lo) - 0.5 * c.b(); }
  double p_hi(const PhysConfig& c) const { return c.P(M.hi + 1) - 0.5 * c.b(); }
};

inline const char* to_string(IntervalAxis a) {
  switch (a) {
    case IntervalAxis::X: return "X";
    case IntervalAxis::P: return "P";
    default: return "joint";
  }
}

inline std::vector<Condition> validity_conditions(const CellTraceTable& t, const IntervalSpec& iv,
                                                  const ValidityOptions& o = {}) {
  const auto& c = t.cfg;
  std::vector<Condition> out;
  const double rem = std::pow(2.0, -c.N);
  out.push_back({"remainder_weight", rem <= o.remainder_tolerance, rem, o.remainder_tolerance,
                 o.remainder_tolerance - rem});
  const double sv = slow_variation_metric(t);
  out.push_back({"slow_variation", sv <= o.slow_variation, sv, o.slow_variation, o.slow_variation - sv});
  const double area = (iv.x_hi(c) - iv.x_lo(c)) * (iv.p_hi(c) - iv.p_lo(c)) /
                      (static_cast<double>(c.cell_dim()) * kTwoPi * c.hbar);
  out.push_back({"interval_broadness", area >= o.broadness, area, o.broadness, area / o.broadness - 1.0});
  return out;
}

/// sqrt(hbar / (gamma kT)) 2^{N/2}
inline double decoherence_time_bound(int N, double gamma, double kT, double hbar = 1.0) {
  if (!(gamma > 0.0) || !(kT > 0.0) || !(hbar > 0.0)) throw ValidationError("bath parameters must be positive");
  return std::sqrt(hbar / (gamma * kT)) * std::pow(2.0, 0.5 * N);
}

/// kT / (hbar omega) in units of 2^N
inline double thermal_ratio(int N, double kT, double omega, double hbar = 1.0) {
  if (!(kT > 0.0) || !(omega > 0.0) || !(hbar > 0.0)) throw ValidationError("thermal parameters must be positive");
  return kT / (hbar * omega) / std::pow(2.0, N);
}

inline void check_truncation_budget(const CellTraceTable& t, double budget) {
  if (t.tail_mass > budget)
    throw TruncationLeak("state mass outside the truncation is " + std::to_string(t.tail_mass) +
                         ", budget " + std::to_string(budget));
}

/// Sum over all levels and cells of <psi|rho|psi> against 1 - 2^-N.
inline AuditReport completeness_audit(const CellTraceTable& t, double tolerance = 0.005, double budget = 1e-6,
                                      const ValidityOptions& o = {}) {
  if (!t.opts.levels) throw ValidationError("completeness audit needs level forms");
  check_truncation_budget(t, budget);
  AuditReport r;
  r.check = "completeness";
  r.per_level = t.sum_levels();
  for (double v : r.per_level) r.measured += v;
  r.predicted = 1.0 - std::pow(2.0, -t.cfg.N);
  r.tolerance = tolerance;
  const auto d = exhaustivity_deficit(t);
  r.details = {{"projector_sum", t.sum_prob()},
               {"remainder_sum", d.chi_sum},
               {"window_leakage", d.leakage},
               {"tail_mass", t.tail_mass}};
  r.conditions = validity_conditions(t, {IntervalAxis::Joint, t.cfg.n_range, t.cfg.M_range}, o);
  return r;
}

inline double cell_probability(const CellTraceTable& t, std::int64_t n, std::int64_t M) {
  return t.at(n, M).prob();
}

struct DualCellProbability {
  double window = 0.0;
  double wigner = 0.0;
};

/// Tr(E rho) by window-basis quadrature and by pairing Wigner functions.
inline DualCellProbability cell_probability_dual(const PhysConfig& cfg, const GridDensity& d, std::int64_t n,
                                                 std::int64_t M) {
  const auto wd = window_density_from_grid(cfg, d);
  DualCellProbability r;
  r.window = cell_traces(wd).at(n, M).prob();
  const auto E = build_cell_projector(cfg, n, M);
  WindowDensity we(cfg);
  const auto P = projector_matrix(E);
  for (std::int64_t i = 0; i < E.dim(); ++i)
    for (std::int64_t j = 0; j < E.dim(); ++j) we.R(we.index(n, E.m_lo() + i), we.index(n, E.m_lo() + j)) = P(i, j);
  r.wigner = wigner_pairing(wigner_transform(grid_from_window(we, d.x, d.hbar)), wigner_transform(d)).real();
  return r;
}

struct IntervalProbability {
  AuditReport report;
  double complement = 0.0;  // Tr((1 - E_interval) rho)
};

/// Sum of cell probabilities over the interval against the canonical
/// marginal over the same phase-space region.
inline IntervalProbability interval_probability(const CellTraceTable& t, const IntervalSpec& iv,
                                                const CanonicalMarginals& canon, double tolerance = 0.01,
                                                const ValidityOptions& o = {}) {
  const auto& c = t.cfg;
  iv.validate(c);
  IntervalProbability r;
  auto& a = r.report;
  a.check = std::string("interval_") + to_string(iv.axis);
  for (auto n = iv.n.lo; n <= iv.n.hi; ++n)
    for (auto M = iv.M.lo; M <= iv.M.hi; ++M) a.measured += t.at(n, M).prob();
  switch (iv.axis) {
    case IntervalAxis::X: a.predicted = canon.x_mass(iv.x_lo(c), iv.x_hi(c)); break;
    case IntervalAxis::P: a.predicted = canon.p_mass(iv.p_lo(c), iv.p_hi(c)); break;
    default: a.predicted = canon.joint_mass(iv.x_lo(c), iv.x_hi(c), iv.p_lo(c), iv.p_hi(c));
  }
  a.tolerance = tolerance * std::abs(a.predicted);
  r.complement = t.rho.trace - a.measured;
  a.conditions = validity_conditions(t, iv, o);
  a.details = {{"relative_error", a.predicted != 0.0 ? a.measured / a.predicted - 1.0 : 0.0},
               {"complement", r.complement},
               {"x_lo", iv.x_lo(c)},
               {"x_hi", iv.x_hi(c)},
               {"p_lo", iv.p_lo(c)},
               {"p_hi", iv.p_hi(c)}};
  return r;
}

/// "n,M,p_nM" rows, n-major.
inline void write_probability_csv(std::ostream& os, const CellTraceTable& t) {
  os << "n,M,p_nM\n";
  char buf[64];
  t.for_each([&](std::int64_t n, std::int64_t M, const CellForms& f) {
    std::snprintf(buf, sizeof buf, "%.17g", f.prob());
    os << n << ',' << M << ',' << buf << '\n';
  });
}

struct ResolutionIdentity {
  double measured = 0.0;    // sum over levels
  double predicted = 0.0;   // (1 - 2^-N) <f|f>
  std::vector<double> per_level;
  double continuum = 0.0;   // phase-space integral, expected <f|f>
  double continuum_tail = 0.0;  // part of it from momenta outside the 2D quadrature box
  double probe_norm = 0.0;
};

namespace detail {

/// Local weight conj(f(x)) f(y) of a cell-local probe state.
inline DiamondEngine::Weights probe_weights(const PhysConfig& cfg, const LatticeState& f) {
  return [a = cfg.a, f](double xl, double yl, double, cplx* out) {
    cplx fx = 0.0, fy = 0.0;
    for (Eigen::Index j = 0; j < f.coeffs.size(); ++j) {
      const double k = kTwoPi * static_cast<double>(f.m_offset + j) / a;
      fx += f.coeffs(j) * std::polar(1.0, k * xl);
      fy += f.coeffs(j) * std::polar(1.0, k * yl);
    }
    out[0] = std::conj(fx) * fy / a;
  };
}

inline double probe_omega(const PhysConfig& cfg, const LatticeState& f) {
  const double k = static_cast<double>(std::max(std::abs(f.m_offset), std::abs(f.m_end() - 1)));
  return kTwoPi * (k + 1.0) / cfg.a;
}

}  // namespace detail

/// Translates of a probe state over each level lattice, against
/// (1 - 2^-N) <f|f>, plus the continuum phase-space average, for Gaussian rho.
inline ResolutionIdentity resolution_identity_check(const PhysConfig& cfg, const GaussianState& g,
                                                    const LatticeState& probe, bool continuum = true) {
  cfg.validate();
  g.validate();
  ResolutionIdentity r;
  r.probe_norm = probe.coeffs.squaredNorm();
  r.predicted = (1.0 - std::pow(2.0, -cfg.N)) * r.probe_norm;
  const double sx = std::sqrt(g.var_x), sp = std::sqrt(g.var_p);
  const double omega = detail::probe_omega(cfg, probe);
  const double pf = omega * cfg.hbar;
  const double plo = g.p0 - 12.0 * sp - pf, phi = g.p0 + 12.0 * sp + pf;
  const double Xf = cfg.X(probe.cell_n);
  const auto nlo = static_cast<std::int64_t>(std::floor((g.q0 - 12.0 * sx - Xf) / cfg.a)) - 1;
  const auto nhi = static_cast<std::int64_t>(std::ceil((g.q0 + 12.0 * sx - Xf) / cfg.a)) + 1;
  double maxdp = 0.0;
  for (double X : {Xf + nlo * cfg.a, Xf + nhi * cfg.a}) {
    const double pbar = g.p0 + g.slope() * (X - g.q0);
    maxdp = std::max({maxdp, std::abs(pbar - plo), std::abs(pbar - phi)});
  }
  DiamondEngine eng(g, cfg.a, omega, maxdp, 1, detail::probe_weights(cfg, probe));
  std::vector<double> centres;
  for (auto n = nlo; n <= nhi; ++n) centres.push_back(Xf + static_cast<double>(n) * cfg.a);
  const auto T = eng.line_sums(centres);
  r.per_level.assign(cfg.N, 0.0);
  for (int K = 1; K <= cfg.N; ++K) {
    const double step = static_cast<double>(ipow2(K)) * cfg.b();
    const auto mlo = static_cast<std::int64_t>(std::floor(plo / step)) - 1;
    const auto mhi = static_cast<std::int64_t>(std::ceil(phi / step)) + 1;
    double s = 0.0;
    for (std::size_t c = 0; c < centres.size(); ++c) {
      if (T[c].cwiseAbs().maxCoeff() == 0.0) continue;
      for (auto m = mlo; m <= mhi; ++m) s += eng.forms(T[c], centres[c], static_cast<double>(m) * step)(0).real();
    }
    r.per_level[K - 1] = s;
    r.measured += s;
  }
  if (continuum) {
    std::vector<double> qn, qw, pn, pw;
    quad::composite_nodes(g.q0 - 12.0 * sx - 0.5 * cfg.a - Xf, g.q0 + 12.0 * sx + 0.5 * cfg.a - Xf,
                          std::max(4, static_cast<int>(std::ceil((24.0 * sx + cfg.a) / std::min(sx, cfg.a)))), 16, qn,
                          qw);
    quad::composite_nodes(plo, phi, std::max(4, static_cast<int>(std::ceil((phi - plo) / std::min(sp, pf)))), 16, pn,
                          pw);
    std::vector<double> cq;
    for (double q : qn) cq.push_back(Xf + q);
    const auto Tq = eng.line_sums(cq);
    double s = 0.0;
    for (std::size_t i = 0; i < cq.size(); ++i) {
      if (Tq[i].cwiseAbs().maxCoeff() == 0.0) continue;
      for (std::size_t j = 0; j < pn.size(); ++j) s += qw[i] * pw[j] * eng.forms(Tq[i], cq[i], pn[j])(0).real();
    }
    // Outside [plo, phi] only the momentum overlap matters: int dp' w(p') (1 - int_box |f(p' - P)|^2 dP).
    std::vector<double> un, uw, kn, kw;
    quad::composite_nodes(g.p0 - 10.0 * sp, g.p0 + 10.0 * sp, 40, 16, un, uw);
    const double kscale = std::numbers::pi * cfg.hbar / cfg.a;
    double tail = 0.0;
    for (std::size_t i = 0; i < un.size(); ++i) {
      kn.clear();
      kw.clear();
      quad::composite_nodes(un[i] - phi, un[i] - plo, static_cast<int>(std::ceil((phi - plo) / kscale)) + 4, 12, kn, kw);
      double in = 0.0;
      for (std::size_t j = 0; j < kn.size(); ++j) in += kw[j] * std::norm(eval_state_momentum(cfg, probe, kn[j]));
      const double z = (un[i] - g.p0) / sp;
      tail += uw[i] * std::exp(-0.5 * z * z) / (sp * std::sqrt(kTwoPi)) * (r.probe_norm - in);
    }
    r.continuum_tail = tail;
    r.continuum = s / (kTwoPi * cfg.hbar) + tail;
  }
  return r;
}

}  // namespace phasecell
