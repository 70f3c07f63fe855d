#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <cstdint>
#include <string>
#include <vector>

#include "phasecell/config.hpp"
#include "phasecell/errors.hpp"
#include "phasecell/quadrature.hpp"

namespace phasecell {

using cplx = std::complex<double>;

struct StateLabel {
  enum class Kind { Window, Level, Remainder };
  Kind kind = Kind::Window;
  int K = 0;           // level, or halving depth for a remainder
  std::int64_t m = 0;  // index in units of 2^K window states

  friend bool operator==(const StateLabel&, const StateLabel&) = default;
};

inline std::string to_string(StateLabel::Kind k) {
  switch (k) {
    case StateLabel::Kind::Window: return "window";
    case StateLabel::Kind::Level: return "level";
    case StateLabel::Kind::Remainder: return "remainder";
  }
  return "?";
}

/// Coefficients of a state over consecutive window states of one cell.
struct LatticeState {
  std::int64_t cell_n = 0;
  std::int64_t m_offset = 0;
  Eigen::VectorXcd coeffs;
  StateLabel label;

  std::int64_t m_end() const { return m_offset + coeffs.size(); }  // one past
  cplx coeff(std::int64_t m) const {
    if (m < m_offset || m >= m_end()) return 0.0;
    return coeffs(m - m_offset);
  }
};

inline std::int64_t ipow2(int k) { return std::int64_t{1} << k; }

/// (-1)^k for any integer k.
inline double parity(std::int64_t k) { return (k & 1) ? -1.0 : 1.0; }

// ---------------------------------------------------------------------------
// pointwise evaluation

/// Window state psi_{nm}(x); half value on the window edges.
inline cplx eval_window_position(const PhysConfig& cfg, LatticeIndex idx, double x) {
  const double loc = x - cfg.X(idx.n);
  const double half = 0.5 * cfg.a;
  const double edge_tol = 1e-14 * cfg.a;
  double h;
  if (std::abs(std::abs(loc) - half) <= edge_tol)
    h = 0.5;
  else if (std::abs(loc) < half)
    h = 1.0;
  else
    return 0.0;
  const double ph = kTwoPi * static_cast<double>(idx.m) * x / cfg.a;
  return h / std::sqrt(cfg.a) * cplx(std::cos(ph), std::sin(ph));
}

/// sin(e/2)/e with the removable point filled in.
inline double half_sinc(double e) {
  if (std::abs(e) < 1e-6) return 0.5 - e * e / 48.0;
  return std::sin(0.5 * e) / e;
}

/// Momentum-space amplitude of psi_{nm}; normalized to unit L2 norm.
inline cplx eval_window_momentum(const PhysConfig& cfg, LatticeIndex idx, double p) {
  const double u = p * cfg.a / cfg.hbar;
  const double e = u - kTwoPi * static_cast<double>(idx.m);
  const double amp = std::sqrt(2.0 * cfg.a / (std::numbers::pi * cfg.hbar)) * half_sinc(e);
  const double ph = -static_cast<double>(idx.n) * u;
  return amp * cplx(std::cos(ph), std::sin(ph));
}

inline cplx eval_state_position(const PhysConfig& cfg, const LatticeState& s, double x) {
  cplx acc = 0.0;
  for (Eigen::Index j = 0; j < s.coeffs.size(); ++j)
    acc += s.coeffs(j) * eval_window_position(cfg, {s.cell_n, s.m_offset + j}, x);
  return acc;
}

inline cplx eval_state_momentum(const PhysConfig& cfg, const LatticeState& s, double p) {
  cplx acc = 0.0;
  for (Eigen::Index j = 0; j < s.coeffs.size(); ++j)
    acc += s.coeffs(j) * eval_window_momentum(cfg, {s.cell_n, s.m_offset + j}, p);
  return acc;
}

// ---------------------------------------------------------------------------
// construction

/// Unnormalized level-K signs c_j, j = 0 .. 2^K-1.
inline std::vector<int> halving_coefficients(int K) {
  if (K < 1 || K > 30) throw ValidationError("halving level K out of range");
  const std::int64_t len = ipow2(K), half = len / 2;
  std::vector<int> c(len);
  for (std::int64_t j = 0; j < len; ++j) {
    const int s = (j & 1) ? -1 : 1;
    c[j] = j < half ? s : -s;
  }
  return c;
}

namespace detail {
inline void check_support(const PhysConfig& cfg, std::int64_t n, std::int64_t lo,
                          std::int64_t len) {
  if (!cfg.n_range.contains(n))
    throw TruncationError("cell n=" + std::to_string(n) + " outside truncation");
  const IntRange w = cfg.window_range();
  if (lo < w.lo || lo + len - 1 > w.hi)
    throw TruncationError("window support [" + std::to_string(lo) + ", " +
                          std::to_string(lo + len - 1) + "] outside truncation");
}
}  // namespace detail

inline LatticeState build_window_state(const PhysConfig& cfg, std::int64_t n, std::int64_t m) {
  detail::check_support(cfg, n, m, 1);
  LatticeState s;
  s.cell_n = n;
  s.m_offset = m;
  s.coeffs = Eigen::VectorXcd::Ones(1);
  s.label = {StateLabel::Kind::Window, 0, m};
  return s;
}

inline LatticeState build_level_state(const PhysConfig& cfg, int K, std::int64_t n,
                                      std::int64_t m) {
  if (K < 1 || K > cfg.N) throw ValidationError("level K must lie in [1, N]");
  const std::int64_t len = ipow2(K);
  detail::check_support(cfg, n, len * m, len);
  const auto c = halving_coefficients(K);
  const double norm = std::pow(2.0, -0.5 * K);
  LatticeState s;
  s.cell_n = n;
  s.m_offset = len * m;
  s.coeffs.resize(len);
  for (std::int64_t j = 0; j < len; ++j) s.coeffs(j) = norm * c[j];
  s.label = {StateLabel::Kind::Level, K, m};
  return s;
}

/// Remainder state chi^(K) with K = N unless given.
inline LatticeState build_remainder_state(const PhysConfig& cfg, std::int64_t n,
                                          std::int64_t m, int K = -1) {
  if (K < 0) K = cfg.N;
  if (K < 1 || K > cfg.N) throw ValidationError("remainder depth must lie in [1, N]");
  const std::int64_t len = ipow2(K);
  detail::check_support(cfg, n, len * m, len);
  const double norm = std::pow(2.0, -0.5 * K);
  LatticeState s;
  s.cell_n = n;
  s.m_offset = len * m;
  s.coeffs.resize(len);
  for (std::int64_t j = 0; j < len; ++j) s.coeffs(j) = norm * parity(j);
  s.label = {StateLabel::Kind::Remainder, K, m};
  return s;
}

/// Level and remainder states built by repeated pairwise halving instead of
/// the closed form. Returns {psi^(K)_{nm}, chi^(K)_{nm}}.
inline std::pair<LatticeState, LatticeState> build_by_recursion(const PhysConfig& cfg, int K,
                                                                std::int64_t n,
                                                                std::int64_t m) {
  if (K < 1 || K > cfg.N) throw ValidationError("level K must lie in [1, N]");
  const std::int64_t len = ipow2(K);
  detail::check_support(cfg, n, len * m, len);
  const double r = std::sqrt(0.5);
  // chis[i] = chi^(k)_{n, 2^{K-k} m + i} over the support, as dense vectors
  std::vector<Eigen::VectorXcd> chis;
  Eigen::VectorXcd psi;
  for (std::int64_t i = 0; i < len / 2; ++i) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(len);
    v(2 * i) = r;
    v(2 * i + 1) = -r;
    chis.push_back(v);
    if (K == 1) {
      psi = Eigen::VectorXcd::Zero(len);
      psi(0) = r;
      psi(1) = r;
    }
  }
  for (int k = 1; k < K; ++k) {
    std::vector<Eigen::VectorXcd> next;
    for (std::size_t i = 0; 2 * i + 1 < chis.size(); ++i) {
      next.push_back(r * (chis[2 * i + 1] + chis[2 * i]));
      if (k + 1 == K) psi = r * (chis[2 * i + 1] - chis[2 * i]);
    }
    chis = std::move(next);
  }
  LatticeState p, c;
  p.cell_n = c.cell_n = n;
  p.m_offset = c.m_offset = len * m;
  p.coeffs = psi;
  c.coeffs = chis.front();
  p.label = {StateLabel::Kind::Level, K, m};
  c.label = {StateLabel::Kind::Remainder, K, m};
  return {p, c};
}

/// Hermitian inner product <s1|s2>; states in different cells are orthogonal.
inline cplx inner_product(const LatticeState& s1, const LatticeState& s2) {
  if (s1.cell_n != s2.cell_n) return 0.0;
  const std::int64_t lo = std::max(s1.m_offset, s2.m_offset);
  const std::int64_t hi = std::min(s1.m_end(), s2.m_end());
  cplx acc = 0.0;
  for (std::int64_t m = lo; m < hi; ++m)
    acc += std::conj(s1.coeffs(m - s1.m_offset)) * s2.coeffs(m - s2.m_offset);
  return acc;
}

inline double state_norm(const LatticeState& s) { return s.coeffs.norm(); }

/// Alternating boundary sum B = sum_m (-1)^m c_m; a state vanishes at the
/// cell edges exactly when B = 0.
inline cplx boundary_sum(const LatticeState& s) {
  cplx b = 0.0;
  for (Eigen::Index j = 0; j < s.coeffs.size(); ++j)
    b += parity(s.m_offset + j) * s.coeffs(j);
  return b;
}

// ---------------------------------------------------------------------------
// position operator in the window basis (cell-local coordinate x - na)

/// <psi_{n,m}| (x - na) |psi_{n,m+d}>
inline cplx x_local_element(double a, std::int64_t d) {
  if (d == 0) return 0.0;
  return cplx(0.0, -a * parity(d) / (kTwoPi * static_cast<double>(d)));
}

/// <psi_{n,m}| (x - na)^2 |psi_{n,m+d}>
inline double x2_local_element(double a, std::int64_t d) {
  if (d == 0) return a * a / 12.0;
  const double dd = static_cast<double>(d);
  return a * a * parity(d) / (2.0 * std::numbers::pi * std::numbers::pi * dd * dd);
}

/// Dense local position matrix on window indices [lo, lo+len).
inline Eigen::MatrixXcd x_local_matrix(double a, std::int64_t len) {
  Eigen::MatrixXcd X(len, len);
  for (std::int64_t i = 0; i < len; ++i)
    for (std::int64_t j = 0; j < len; ++j) X(i, j) = x_local_element(a, j - i);
  return X;
}

inline Eigen::MatrixXcd x2_local_matrix(double a, std::int64_t len) {
  Eigen::MatrixXcd X(len, len);
  for (std::int64_t i = 0; i < len; ++i)
    for (std::int64_t j = 0; j < len; ++j) X(i, j) = x2_local_element(a, j - i);
  return X;
}

/// <x^order>, order 1 or 2, from closed-form matrix elements.
inline double position_moment(const PhysConfig& cfg, const LatticeState& s, int order) {
  if (order != 1 && order != 2) throw ValidationError("position moment order must be 1 or 2");
  const auto len = s.coeffs.size();
  const double xn = cfg.X(s.cell_n);
  const double nn = s.coeffs.squaredNorm();
  const cplx x1 = s.coeffs.dot(x_local_matrix(cfg.a, len) * s.coeffs);
  if (order == 1) return (x1.real() + xn * nn) / nn;
  const cplx x2 = s.coeffs.dot(x2_local_matrix(cfg.a, len) * s.coeffs);
  return (x2.real() + 2.0 * xn * x1.real() + xn * xn * nn) / nn;
}

// ---------------------------------------------------------------------------
// momentum moments

/// Exact momentum moments from coefficients; the second moment exists only
/// when the state vanishes at the cell edges.
inline double exact_momentum_moment(const PhysConfig& cfg, const LatticeState& s, int order) {
  if (order == 2 && std::abs(boundary_sum(s)) > 1e-12 * std::max(1.0, s.coeffs.norm()))
    throw DivergentMoment("second momentum moment diverges (state does not vanish at the cell edges)");
  double acc = 0.0, nn = 0.0;
  for (Eigen::Index j = 0; j < s.coeffs.size(); ++j) {
    const double w = std::norm(s.coeffs(j));
    const double p = cfg.b() * static_cast<double>(s.m_offset + j);
    nn += w;
    acc += w * (order == 1 ? p : p * p);
  }
  return acc / nn;
}

struct MomentumQuadOptions {
  double panel_fraction = 1.0 / 16.0;  // panel width in units of b
  double tol = 1e-15;
  int laurent_terms = 24;
};

namespace detail {

// |psi~(v)|^2 in the dimensionless shifted variable v = u - 2 pi kc, up to
// the 2/pi prefactor: sin^2(v/2) |sum_j e_j / (v - v_j)|^2.
struct MomentumProfile {
  std::vector<double> vj;
  std::vector<cplx> ej;  // coefficient times (-1)^k, used by the tail expansion
  std::vector<cplx> dj;  // raw coefficient

  double operator()(double v) const {
    cplx s = 0.0;
    for (std::size_t j = 0; j < vj.size(); ++j) s += dj[j] * half_sinc(v - vj[j]);
    return std::norm(s);
  }
};

inline MomentumProfile momentum_profile(const LatticeState& s, std::int64_t kc) {
  MomentumProfile prof;
  for (Eigen::Index j = 0; j < s.coeffs.size(); ++j) {
    const std::int64_t k = s.m_offset + j - kc;
    prof.vj.push_back(kTwoPi * static_cast<double>(k));
    prof.ej.push_back(s.coeffs(j) * parity(k));
    prof.dj.push_back(s.coeffs(j));
  }
  return prof;
}

// Asymptotic decay slope of the period-averaged |psi~|^2.
inline double tail_slope(const MomentumProfile& prof, double v0) {
  const auto& r = quad::gauss_legendre(48);
  std::vector<double> lx, ly;
  for (int i = 0; i < 5; ++i) {
    const double u = v0 * std::pow(2.0, i);
    double avg = 0.0;
    for (std::size_t q = 0; q < r.x.size(); ++q)
      avg += 0.5 * r.w[q] * prof(u + std::numbers::pi * (1.0 + r.x[q]));
    lx.push_back(std::log(u));
    ly.push_back(std::log(avg));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
  mx /= lx.size();
  my /= ly.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace detail

/// Result of a momentum moment evaluated by quadrature.
struct MomentumMomentResult {
  double value = 0.0;        // <p^order>
  double tail = 0.0;         // analytic tail contribution included in value
  double cutoff = 0.0;       // symmetric cutoff |p| <= cutoff around the centre
  double decay_slope = 0.0;  // fitted log-log slope of |psi~|^2
};

/// <p^order> (order 0, 1 or 2) by panel quadrature over the momentum
/// representation, plus an analytic correction for |p| beyond the cutoff.
/// Throws DivergentMoment for order 2 on states with 1/p tails.
inline MomentumMomentResult momentum_moment_detail(const PhysConfig& cfg, const LatticeState& s,
                                                   int order, MomentumQuadOptions opt = {}) {
  if (order < 0 || order > 2) throw ValidationError("momentum moment order must be 0, 1 or 2");
  const std::int64_t kc = s.m_offset + s.coeffs.size() / 2;
  const auto prof = detail::momentum_profile(s, kc);
  double vmax = 0.0;
  for (double v : prof.vj) vmax = std::max(vmax, std::abs(v));
  const double kmax = vmax / kTwoPi;

  MomentumMomentResult res;
  res.decay_slope = detail::tail_slope(prof, kTwoPi * std::ceil(8.0 * kmax + 64.0) + 0.0);
  if (order == 2 && res.decay_slope > -3.0)
    throw DivergentMoment("momentum dispersion diverges: |psi~|^2 decays with slope " +
                          std::to_string(res.decay_slope));

  const double L = kTwoPi * std::ceil(8.0 * kmax + 64.0);
  const double h = kTwoPi * opt.panel_fraction;
  const auto panels = static_cast<std::int64_t>(std::llround(2.0 * L / h));
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::int64_t i = 0; i < panels; ++i) {
    const double lo = -L + i * h, hi = lo + h;
    m0 += quad::adaptive([&](double v) { return prof(v); }, lo, hi, opt.tol);
    if (order >= 1) m1 += quad::adaptive([&](double v) { return v * prof(v); }, lo, hi, opt.tol);
    if (order >= 2)
      m2 += quad::adaptive([&](double v) { return v * v * prof(v); }, lo, hi, opt.tol);
  }

  // Laurent expansion of sum_j e_j/(v - v_j) = sum_q mu_q / v^{q+1}; scaled by L.
  const int Q = opt.laurent_terms;
  std::vector<cplx> mu(Q, 0.0);
  for (std::size_t j = 0; j < prof.vj.size(); ++j) {
    double pw = 1.0;
    for (int q = 0; q < Q; ++q) {
      mu[q] += prof.ej[j] * pw;
      pw *= prof.vj[j] / L;
    }
  }
  // |S|^2 = sum_q F_q L^{q-2} / v^q (F in scaled units)
  auto tail_for = [&](int o) {
    double t = 0.0;
    for (int q = 2; q < Q; ++q) {
      double F = 0.0;
      for (int r = 0; r <= q - 2; ++r) F += (mu[r] * std::conj(mu[q - 2 - r])).real();
      const int rr = q - o;
      if (rr % 2 != 0) continue;
      if (rr <= 1) {
        if (std::abs(F) > 1e-14) return std::numeric_limits<double>::infinity();
        continue;
      }
      // scale: F_true = F * L^{q-2}; integrals of v^{o-q} over |v| > L
      const double flat = 2.0 * std::pow(L, o - q + 1) / (rr - 1.0);
      const double r1 = rr;
      const double cosint = 2.0 * (r1 * std::pow(L, -r1 - 1) -
                                   r1 * (r1 + 1) * (r1 + 2) * std::pow(L, -r1 - 3) +
                                   r1 * (r1 + 1) * (r1 + 2) * (r1 + 3) * (r1 + 4) *
                                       std::pow(L, -r1 - 5));
      t += F * std::pow(L, q - 2) * 0.5 * (flat - cosint);
    }
    return t;
  };
  const double t0 = tail_for(0);
  const double t1 = order >= 1 ? tail_for(1) : 0.0;
  const double t2 = order >= 2 ? tail_for(2) : 0.0;
  if (!std::isfinite(t2)) throw DivergentMoment("momentum dispersion diverges");
  const double norm = m0 + t0;  // (pi/2) * |s|^2
  const double c = cfg.hbar / cfg.a;
  const double vc = kTwoPi * static_cast<double>(kc);
  const double ev1 = (m1 + t1) / norm, ev2 = (m2 + t2) / norm;
  const double nn = s.coeffs.squaredNorm();
  res.cutoff = L * c;
  switch (order) {
    case 0:
      res.value = norm * 2.0 / std::numbers::pi / nn;
      res.tail = t0 * 2.0 / std::numbers::pi / nn;
      break;
    case 1:
      res.value = c * (ev1 + vc);
      res.tail = c * t1 / norm;
      break;
    default:
      res.value = c * c * (ev2 + 2.0 * vc * ev1 + vc * vc);
      res.tail = c * c * t2 / norm;
  }
  return res;
}

inline double momentum_moment(const PhysConfig& cfg, const LatticeState& s, int order) {
  if (order != 1 && order != 2) throw ValidationError("momentum moment order must be 1 or 2");
  return momentum_moment_detail(cfg, s, order).value;
}

// ---------------------------------------------------------------------------
// lattice translations

/// Phase-space translation by dn cells and dk window units:
/// psi_{n,k} -> (-1)^{dn dk} psi_{n+dn, k+dk}.
inline LatticeState shift_state_window(const PhysConfig& cfg, const LatticeState& s,
                                       std::int64_t dn, std::int64_t dk) {
  detail::check_support(cfg, s.cell_n + dn, s.m_offset + dk, s.coeffs.size());
  LatticeState t = s;
  t.cell_n += dn;
  t.m_offset += dk;
  t.coeffs *= parity(dn * dk);
  switch (s.label.kind) {
    case StateLabel::Kind::Window: t.label.m += dk; break;
    case StateLabel::Kind::Level:
    case StateLabel::Kind::Remainder:
      if (dk % ipow2(s.label.K) == 0)
        t.label.m += dk / ipow2(s.label.K);
      else
        t.label = {StateLabel::Kind::Window, 0, t.m_offset};  // no longer a labelled state
      break;
  }
  return t;
}

/// Translation by dn cells and dM macro momentum cells (2^N window units each).
inline LatticeState shift_state(const PhysConfig& cfg, const LatticeState& s, std::int64_t dn,
                                std::int64_t dM) {
  return shift_state_window(cfg, s, dn, dM * cfg.cell_dim());
}

}  // namespace phasecell
