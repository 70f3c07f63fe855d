#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "phasecell/cell_traces.hpp"
#include "phasecell/gaussian_lattice.hpp"
#include "phasecell/phase_projectors.hpp"
#include "phasecell/window_density.hpp"

namespace phasecell {

/// Commuting position and momentum built from the macro-cell projectors.
/// X acts as n a on cell n, P as M 2^N b + p_offset b on macro-cell M, and
/// both vanish on the remainder states.
struct CommutingPair {
  PhysConfig cfg;
  double p_offset = 0.0;  // units of b
  std::vector<double> X_spectrum, P_spectrum;

  double X(std::int64_t n) const { return X_spectrum.at(static_cast<std::size_t>(n - cfg.n_range.lo)); }
  double P(std::int64_t M) const { return P_spectrum.at(static_cast<std::size_t>(M - cfg.M_range.lo)); }
  /// P(M) minus the macro-cell label momentum
  double offset_momentum() const { return p_offset * cfg.b(); }
};

inline CommutingPair build_pair(const PhysConfig& cfg, bool recentered = true) {
  cfg.validate();
  if (cfg.n_range.size() < 3 || cfg.M_range.size() < 3)
    throw ValidationError("truncation needs at least three macro-cells per axis");
  CommutingPair p;
  p.cfg = cfg;
  p.p_offset = recentered ? recentering_offset(cfg.N) : 0.0;
  for (auto n = cfg.n_range.lo; n <= cfg.n_range.hi; ++n) p.X_spectrum.push_back(cfg.X(n));
  for (auto M = cfg.M_range.lo; M <= cfg.M_range.hi; ++M) p.P_spectrum.push_back(cfg.P(M) + p.offset_momentum());
  return p;
}

/// Dense operators on the truncated window basis.
struct DenseOperators {
  Eigen::MatrixXcd Xhat, Phat;  // commuting pair
  Eigen::MatrixXcd x, p;        // canonical pair restricted to the window basis
};

inline DenseOperators dense_operators(const CommutingPair& pair) {
  const auto& cfg = pair.cfg;
  if (cfg.N > 6) throw ValidationError("dense operators are limited to N <= 6");
  WindowDensity w(cfg);
  const auto kd = w.kdim(), D = cfg.cell_dim();
  const auto wr = cfg.window_range();
  DenseOperators o;
  o.Xhat = Eigen::MatrixXcd::Zero(w.dim(), w.dim());
  o.Phat = o.Xhat;
  o.x = o.Xhat;
  o.p = o.Xhat;
  const Eigen::MatrixXcd xl = x_local_matrix(cfg.a, kd);
  for (auto n = cfg.n_range.lo; n <= cfg.n_range.hi; ++n) {
    const auto base = w.index(n, wr.lo);
    o.x.block(base, base, kd, kd) = xl + cfg.X(n) * Eigen::MatrixXcd::Identity(kd, kd);
    for (std::int64_t k = 0; k < kd; ++k) o.p(base + k, base + k) = cfg.b() * static_cast<double>(wr.lo + k);
    for (auto M = cfg.M_range.lo; M <= cfg.M_range.hi; ++M) {
      const auto E = projector_matrix(build_cell_projector(cfg, n, M));
      const auto at = w.index(n, M * D);
      o.Xhat.block(at, at, D, D) = pair.X(n) * E;
      o.Phat.block(at, at, D, D) = pair.P(M) * E;
    }
  }
  return o;
}

/// Squared distance between one commuting operator and its canonical
/// counterpart in the state rho.
struct NormParts {
  double headline = 0.0;  // sum over cells of Tr(E_c (a - A_c) rho (a - A_c))
  double full = 0.0;      // Tr((A - a) rho (A - a))
  double d2 = 0.0;        // full - headline
  double commutator_term = 0.0;  // Im part picked up when A is kept to the left of a
};

struct DistanceNorms {
  NormParts x, p;
};

inline DistanceNorms distance_norms(const CommutingPair& pair, const CellTraceTable& t) {
  if (!t.opts.x_forms || !t.opts.p_forms) throw ValidationError("distance norms need position and momentum forms");
  const auto& cfg = t.cfg;
  const double off = pair.offset_momentum();
  DistanceNorms r;
  double sxa = 0.0, sxb = 0.0, spa = 0.0, spb = 0.0, cx = 0.0, cp = 0.0;
  t.for_each([&](std::int64_t n, std::int64_t M, const CellForms& f) {
    const double pr = f.prob();
    r.x.headline += f.block_xx - f.chi_xx;
    r.p.headline += (f.block_pp - 2.0 * off * f.block_p1 + off * off * f.block) -
                    (f.chi_pp - 2.0 * off * f.chi_p1.real() + off * off * f.chi);
    const double Xc = pair.X(n), Pc = pair.P(M);
    const cplx ex = (f.block_x1 - f.chi_x1) + cfg.X(n) * pr;
    const cplx ep = (f.block_p1 - f.chi_p1) + cfg.P(M) * pr;
    sxa += Xc * ex.real();
    sxb += Xc * Xc * pr;
    cx += Xc * ex.imag();
    spa += Pc * ep.real();
    spb += Pc * Pc * pr;
    cp += Pc * ep.imag();
  });
  const double tr = t.rho.trace;
  r.x.full = tr * t.rho.mean_x2 - 2.0 * sxa + sxb;
  r.p.full = tr * t.rho.mean_p2 - 2.0 * spa + spb;
  r.x.d2 = r.x.full - r.x.headline;
  r.p.d2 = r.p.full - r.p.headline;
  r.x.commutator_term = 2.0 * cx;
  r.p.commutator_term = 2.0 * cp;
  return r;
}

/// 2^{N/2} pi / (3 sqrt 2)
inline double closeness_predicted(int N) {
  return std::pow(2.0, 0.5 * N) * std::numbers::pi / (3.0 * std::numbers::sqrt2);
}

struct ClosenessReport {
  int N = 0;
  double a = 1.0, hbar = 1.0;
  std::string rho_descriptor;
  DistanceNorms norms;
  double product = 0.0;  // sqrt(headline_x * headline_p)
  double C_measured = 0.0;
  double C_predicted = 0.0;
  double var_x_E = 0.0;          // exact projector position variance
  double var_p_E = 0.0;          // exact projector momentum variance
  double var_p_E_leading = 0.0;  // leading large-N form
  double deficit = 0.0;
  double tail_mass = 0.0;
};

inline ClosenessReport closeness_product(const CommutingPair& pair, const CellTraceTable& t,
                                         std::string descriptor = {}) {
  ClosenessReport r;
  const auto& cfg = pair.cfg;
  r.N = cfg.N;
  r.a = cfg.a;
  r.hbar = cfg.hbar;
  r.rho_descriptor = std::move(descriptor);
  r.norms = distance_norms(pair, t);
  r.product = std::sqrt(std::max(0.0, r.norms.x.headline) * std::max(0.0, r.norms.p.headline));
  r.C_measured = r.product / cfg.hbar;
  r.C_predicted = closeness_predicted(cfg.N);
  const auto m = projector_moments(cfg, build_cell_projector(cfg, cfg.n_range.lo, cfg.M_range.lo));
  r.var_x_E = m.var_x;
  r.var_p_E = m.var_p;
  r.var_p_E_leading = m.var_p_leading;
  r.deficit = exhaustivity_deficit(t).deficit;
  r.tail_mass = t.tail_mass;
  return r;
}

inline ClosenessReport closeness_product(const CommutingPair& pair, const GaussianState& g,
                                         std::string descriptor = "gaussian") {
  return closeness_product(pair, cell_traces(pair.cfg, g, {true, true, false}), std::move(descriptor));
}

/// Reports over a family of states plus the index of the largest C.
struct ClosenessFamily {
  std::vector<ClosenessReport> reports;
  std::size_t worst = 0;
};

inline ClosenessFamily closeness_family(const CommutingPair& pair, const std::vector<GaussianState>& family) {
  if (family.empty()) throw ValidationError("empty state family");
  ClosenessFamily f;
  for (std::size_t i = 0; i < family.size(); ++i) {
    f.reports.push_back(closeness_product(pair, family[i], "family[" + std::to_string(i) + "]"));
    if (f.reports[i].C_measured > f.reports[f.worst].C_measured) f.worst = i;
  }
  return f;
}

struct PseudoClassical {
  WindowDensity rho_prime;
  double trace_distance = 0.0;
};

/// rho' = sum_c Tr(E_c rho) E_c / Tr E_c + sum_c <chi_c|rho|chi_c> |chi_c><chi_c|
inline WindowDensity pseudoclassical_map(const CommutingPair& pair, const WindowDensity& rho) {
  const auto& cfg = pair.cfg;
  WindowDensity out(cfg);
  const auto D = cfg.cell_dim();
  const double tr = static_cast<double>(D - 1);
  for (auto n = cfg.n_range.lo; n <= cfg.n_range.hi; ++n)
    for (auto M = cfg.M_range.lo; M <= cfg.M_range.hi; ++M) {
      const auto E = build_cell_projector(cfg, n, M);
      const Eigen::MatrixXcd P = projector_matrix(E);
      const auto& chi = E.complement.coeffs;
      const auto at = out.index(n, M * D);
      const Eigen::MatrixXcd B = rho.R.block(at, at, D, D);
      const double pc = (P * B).trace().real();
      const double qc = chi.dot(B * chi).real();
      out.R.block(at, at, D, D) = (pc / tr) * P + qc * chi * chi.adjoint();
    }
  return out;
}

inline double trace_distance(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B) {
  const Eigen::MatrixXcd H = 0.5 * ((A - B) + (A - B).adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline PseudoClassical pseudoclassical_approximation(const CommutingPair& pair, const WindowDensity& rho) {
  PseudoClassical r;
  r.rho_prime = pseudoclassical_map(pair, rho);
  r.trace_distance = trace_distance(rho.R, r.rho_prime.R);
  return r;
}

/// Window-basis matrix of a Gaussian by per-cell quadrature, with the node
/// count set from the highest frequency present.
inline WindowDensity gaussian_window_density(const PhysConfig& cfg, const GaussianState& g) {
  const auto wr = cfg.window_range();
  const double kmax = static_cast<double>(std::max(std::abs(wr.lo), std::abs(wr.hi)));
  const double pmax = std::abs(g.p0) + 8.0 * std::sqrt(g.var_p);
  const double omega = kTwoPi * kmax / cfg.a + pmax / cfg.hbar;
  const int Q = static_cast<int>(std::ceil(0.7 * omega * cfg.a + 40.0));
  return window_density_from_kernel(cfg, [&](double x, double y) { return g.kernel(x, y); }, Q);
}

/// m dv dx / hbar
inline double regime_estimate(double dx, double dv, double mass, double hbar = 1.054571817e-34) {
  if (!(dx > 0.0) || !(dv > 0.0) || !(mass > 0.0) || !(hbar > 0.0))
    throw ValidationError("regime inputs must be positive");
  return mass * dv * dx / hbar;
}

}  // namespace phasecell
