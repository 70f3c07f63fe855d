#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "phasecell/cell_traces.hpp"
#include "phasecell/gaussian_state.hpp"
#include "phasecell/lattice_states.hpp"
#include "phasecell/quadrature.hpp"

namespace phasecell {

namespace detail {

/// s0 = sum_{j<L} e^{i j phi}, s1 = sum_{j<L} j e^{i j phi}
inline void geo_sums(std::int64_t L, double phi, cplx& s0, cplx& s1) {
  const double sh = std::sin(0.5 * phi);
  if (std::abs(sh) < 0.02) {
    const cplx z = std::polar(1.0, phi);
    cplx zj = 1.0;
    s0 = s1 = 0.0;
    for (std::int64_t j = 0; j < L; ++j) {
      s0 += zj;
      s1 += static_cast<double>(j) * zj;
      zj *= z;
    }
    return;
  }
  const double Ld = static_cast<double>(L);
  const cplx z = std::polar(1.0, phi);
  const cplx zL = std::polar(1.0, Ld * phi);
  const cplx omz = cplx(0.0, -2.0 * sh) * std::polar(1.0, 0.5 * phi);
  s0 = (1.0 - zL) / omz;
  s1 = z * (1.0 - Ld * std::polar(1.0, (Ld - 1.0) * phi) + (Ld - 1.0) * zL) / (omz * omz);
}

inline cplx geo_sum(std::int64_t L, double phi) {
  cplx s0, s1;
  geo_sums(L, phi, s0, s1);
  return s0;
}

}  // namespace detail

/// Quadrature over one cell-pair domain |x - X|, |y - X| <= a/2 written in
/// s = (x+y)/2 - X, xi = x - y. Evaluates
///   F(X, P) = int ds dxi Phi(s, xi) rho(X + s + xi/2, X + s - xi/2) e^{-i P xi / hbar}
/// for a Gaussian rho and a family of local weight functions Phi.
/// The cell-independent part of the integrand is reduced per xi node and
/// centre; the momentum label enters only through a phase in xi.
class DiamondEngine {
 public:
  /// Fills out[k] = Phi_k at local coordinates (xl, yl) = (s + xi/2, s - xi/2).
  using Weights = std::function<void(double xl, double yl, double xi, cplx* out)>;

  struct Options {
    int xi_order = 16;
    int s_order = 12;
    double xi_cut_lengths = 10.0;  // xi range in coherence lengths
  };

  DiamondEngine(const GaussianState& g, double a, double omega_local, double max_dp, int kinds,
                Weights w)
      : DiamondEngine(g, a, omega_local, max_dp, kinds, std::move(w), Options{}) {}

  DiamondEngine(const GaussianState& g, double a, double omega_local, double max_dp, int kinds,
                Weights w, Options opt)
      : g_(g), a_(a), nk_(kinds), w_(std::move(w)) {
    const double hb = g.hbar;
    const double ell = g.coherence_length();
    const double beta = g.slope();
    const double sx = std::sqrt(g.var_x);
    const double xc = std::min(a, opt.xi_cut_lengths * ell);
    const double om_xi = omega_local + max_dp / hb + std::abs(beta) * a / (2.0 * hb);
    const double om_s = omega_local + std::abs(beta) * xc / hb;
    const int xp = std::max(2, static_cast<int>(std::ceil(om_xi * xc / kTwoPi)) +
                                   static_cast<int>(std::ceil(xc / (3.0 * ell))));
    std::vector<double> xn, xw;
    quad::composite_nodes(-xc, 0.0, xp, opt.xi_order, xn, xw);
    quad::composite_nodes(0.0, xc, xp, opt.xi_order, xn, xw);
    const double cp2 = 0.5 * g.var_p_cond() / (hb * hb);
    start_.push_back(0);
    for (std::size_t l = 0; l < xn.size(); ++l) {
      const double xi = xn[l];
      const double Ls = a - std::abs(xi);
      const int sp = std::max(2, static_cast<int>(std::ceil(Ls * om_s / kTwoPi)) +
                                     static_cast<int>(std::ceil(Ls / sx)));
      std::vector<double> sn, sw;
      quad::composite_nodes(-0.5 * Ls, 0.5 * Ls, sp, opt.s_order, sn, sw);
      for (std::size_t i = 0; i < sn.size(); ++i) {
        s_.push_back(sn[i]);
        ws_.push_back(sw[i]);
      }
      xi_.push_back(xi);
      wxi_.push_back(xw[l] * std::exp(-cp2 * xi * xi));
      start_.push_back(static_cast<std::int64_t>(s_.size()));
    }
  }

  std::size_t xi_nodes() const { return xi_.size(); }
  std::size_t total_nodes() const { return s_.size(); }
  const std::vector<double>& xi() const { return xi_; }

  /// Reduced sums T_c(l, k) for each centre X_c; centres whose position
  /// density is negligible on the whole cell give zero matrices.
  std::vector<Eigen::MatrixXcd> line_sums(const std::vector<double>& centres) const {
    const auto nc = centres.size();
    std::vector<Eigen::MatrixXcd> T(nc, Eigen::MatrixXcd::Zero(xi_.size(), nk_));
    std::vector<std::size_t> active;
    const double sx = std::sqrt(g_.var_x);
    for (std::size_t c = 0; c < nc; ++c)
      if (std::abs(centres[c] - g_.q0) - 0.5 * a_ < 40.0 * sx) active.push_back(c);
    if (active.empty()) return T;
    const double beta_h = g_.slope() / g_.hbar;
    std::vector<cplx> buf(nk_);
    for (std::size_t l = 0; l < xi_.size(); ++l) {
      const auto i0 = start_[l], i1 = start_[l + 1];
      const auto S = i1 - i0;
      const double xi = xi_[l];
      Eigen::MatrixXd Vr(S, nk_), Vi(S, nk_);
      for (std::int64_t i = 0; i < S; ++i) {
        const double s = s_[i0 + i];
        w_(s + 0.5 * xi, s - 0.5 * xi, xi, buf.data());
        const cplx f = (ws_[i0 + i] * wxi_[l]) * std::polar(1.0, beta_h * s * xi);
        for (int k = 0; k < nk_; ++k) {
          const cplx v = f * buf[k];
          Vr(i, k) = v.real();
          Vi(i, k) = v.imag();
        }
      }
      Eigen::MatrixXd G(active.size(), S);
      for (std::size_t c = 0; c < active.size(); ++c)
        for (std::int64_t i = 0; i < S; ++i) G(c, i) = g_.x_density(centres[active[c]] + s_[i0 + i]);
      const Eigen::MatrixXd Tr = G * Vr, Ti = G * Vi;
      for (std::size_t c = 0; c < active.size(); ++c)
        for (int k = 0; k < nk_; ++k) T[active[c]](l, k) = cplx(Tr(c, k), Ti(c, k));
    }
    return T;
  }

  /// F(X, P) for every kind, given the reduced sums of centre X.
  Eigen::VectorXcd forms(const Eigen::MatrixXcd& T, double X, double P) const {
    const double pbar = g_.p0 + g_.slope() * (X - g_.q0);
    Eigen::VectorXcd ph(xi_.size());
    for (std::size_t l = 0; l < xi_.size(); ++l) ph(l) = std::polar(1.0, (pbar - P) * xi_[l] / g_.hbar);
    return T.transpose() * ph;
  }

 private:
  GaussianState g_;
  double a_;
  int nk_;
  Weights w_;
  std::vector<double> xi_, wxi_, s_, ws_;
  std::vector<std::int64_t> start_;
};

/// Kind layout of the standard cell forms.
struct StandardKinds {
  int block = 0, chi = 1;
  int block_x1 = -1, chi_x1 = -1, block_xx = -1, chi_xx = -1;
  int block_p1 = -1, chi_p1 = -1, block_pp = -1, chi_pp = -1;
  int level0 = -1;
  int count = 2;

  explicit StandardKinds(const TraceOptions& o, int N) {
    if (o.x_forms) {
      block_x1 = count++;
      chi_x1 = count++;
      block_xx = count++;
      chi_xx = count++;
    }
    if (o.p_forms) {
      block_p1 = count++;
      chi_p1 = count++;
      block_pp = count++;
      chi_pp = count++;
    }
    if (o.levels) {
      level0 = count;
      count += N;
    }
  }
};

/// Weight functions of the standard cell forms for halving depth N.
inline DiamondEngine::Weights standard_weights(int N, double a, double hbar, StandardKinds kinds) {
  struct Cache {
    double xi = std::numeric_limits<double>::quiet_NaN();
    cplx b0, b1, b2;
    std::vector<cplx> lev;
  };
  auto cache = std::make_shared<Cache>();
  return [=](double xl, double yl, double xi, cplx* out) {
    const std::int64_t L = ipow2(N);
    const double k1 = kTwoPi / a;
    const double cn = std::pow(2.0, -0.5 * N) / std::sqrt(a);
    Cache& C = *cache;
    if (xi != C.xi) {
      C.xi = xi;
      cplx s0, s1;
      detail::geo_sums(L, -k1 * xi, s0, s1);
      C.b0 = s0 / a;
      C.b1 = hbar * k1 * s1 / a;
      if (kinds.block_pp >= 0) {
        cplx acc = 0.0, z = std::polar(1.0, -k1 * xi), zj = 1.0;
        for (std::int64_t j = 0; j < L; ++j, zj *= z) acc += static_cast<double>(j * j) * zj;
        C.b2 = hbar * hbar * k1 * k1 * acc / a;
      }
      if (kinds.level0 >= 0) {
        C.lev.resize(N);
        for (int K = 1; K <= N; ++K)
          C.lev[K - 1] = detail::geo_sum(ipow2(N - K), -k1 * static_cast<double>(ipow2(K)) * xi);
      }
    }
    cplx cx0, cx1, cy0, cy1;
    detail::geo_sums(L, k1 * xl + std::numbers::pi, cx0, cx1);
    detail::geo_sums(L, k1 * yl + std::numbers::pi, cy0, cy1);
    const cplx chx = cn * cx0, chy = cn * cy0;
    const cplx cc = std::conj(chx) * chy;
    out[kinds.block] = C.b0;
    out[kinds.chi] = cc;
    if (kinds.block_x1 >= 0) {
      out[kinds.block_x1] = xl * C.b0;
      out[kinds.chi_x1] = xl * cc;
      out[kinds.block_xx] = xl * yl * C.b0;
      out[kinds.chi_xx] = xl * yl * cc;
    }
    if (kinds.block_p1 >= 0) {
      const cplx pchx = cn * hbar * k1 * cx1, pchy = cn * hbar * k1 * cy1;
      out[kinds.block_p1] = C.b1;
      out[kinds.chi_p1] = std::conj(pchx) * chy;
      out[kinds.block_pp] = C.b2;
      out[kinds.chi_pp] = std::conj(pchx) * pchy;
    }
    if (kinds.level0 >= 0) {
      for (int K = 1; K <= N; ++K) {
        const std::int64_t h = ipow2(K - 1);
        const double norm = std::pow(2.0, -0.5 * K) / std::sqrt(a);
        cplx ax, ay, d;
        detail::geo_sums(h, k1 * xl + std::numbers::pi, ax, d);
        detail::geo_sums(h, k1 * yl + std::numbers::pi, ay, d);
        const double sg = parity(h);
        const cplx gx = norm * ax * (1.0 - sg * std::polar(1.0, k1 * static_cast<double>(h) * xl));
        const cplx gy = norm * ay * (1.0 - sg * std::polar(1.0, k1 * static_cast<double>(h) * yl));
        out[kinds.level0 + K - 1] = std::conj(gx) * gy * C.lev[K - 1];
      }
    }
  };
}

/// Gaussian mass outside the truncation rectangle (union bound).
inline double truncation_tail_mass(const PhysConfig& cfg, const GaussianState& g) {
  const double xlo = cfg.X(cfg.n_range.lo) - 0.5 * cfg.a, xhi = cfg.X(cfg.n_range.hi) + 0.5 * cfg.a;
  const double plo = cfg.P(cfg.M_range.lo) - 0.5 * cfg.b();
  const double phi = cfg.P(cfg.M_range.hi + 1) - 0.5 * cfg.b();
  return (1.0 - g.x_mass(xlo, xhi)) + (1.0 - g.p_mass(plo, phi));
}

/// Per-cell forms of a Gaussian density operator.
inline CellTraceTable cell_traces(const PhysConfig& cfg, const GaussianState& g, TraceOptions opt = {}) {
  cfg.validate();
  g.validate();
  if (std::abs(g.hbar - cfg.hbar) > 1e-12 * cfg.hbar)
    throw ValidationError("state and lattice use different hbar");
  CellTraceTable t(cfg, opt);
  const StandardKinds kinds(opt, cfg.N);
  const double omega = kTwoPi * static_cast<double>(cfg.cell_dim()) / cfg.a;
  double max_dp = 0.0;
  for (std::int64_t n : {cfg.n_range.lo, cfg.n_range.hi})
    for (std::int64_t M : {cfg.M_range.lo, cfg.M_range.hi}) {
      const double pbar = g.p0 + g.slope() * (cfg.X(n) - g.q0);
      max_dp = std::max(max_dp, std::abs(pbar - cfg.P(M)));
    }
  DiamondEngine eng(g, cfg.a, omega, max_dp, kinds.count, standard_weights(cfg.N, cfg.a, cfg.hbar, kinds));
  std::vector<double> centres;
  for (std::int64_t n = cfg.n_range.lo; n <= cfg.n_range.hi; ++n) centres.push_back(cfg.X(n));
  const auto T = eng.line_sums(centres);
  for (std::int64_t n = cfg.n_range.lo; n <= cfg.n_range.hi; ++n) {
    const auto& Tn = T[n - cfg.n_range.lo];
    if (Tn.cwiseAbs().maxCoeff() == 0.0) continue;
    for (std::int64_t M = cfg.M_range.lo; M <= cfg.M_range.hi; ++M) {
      const Eigen::VectorXcd v = eng.forms(Tn, cfg.X(n), cfg.P(M));
      auto& f = t.at(n, M);
      f.block = v(kinds.block).real();
      f.chi = v(kinds.chi).real();
      if (opt.x_forms) {
        f.block_x1 = v(kinds.block_x1);
        f.chi_x1 = v(kinds.chi_x1);
        f.block_xx = v(kinds.block_xx).real();
        f.chi_xx = v(kinds.chi_xx).real();
      }
      if (opt.p_forms) {
        f.block_p1 = v(kinds.block_p1).real();
        f.chi_p1 = v(kinds.chi_p1);
        f.block_pp = v(kinds.block_pp).real();
        f.chi_pp = v(kinds.chi_pp).real();
      }
      if (opt.levels)
        for (int K = 1; K <= cfg.N; ++K) f.level[K - 1] = v(kinds.level0 + K - 1).real();
    }
  }
  t.rho = {1.0, g.q0, g.var_x + g.q0 * g.q0, g.p0, g.var_p + g.p0 * g.p0};
  t.tail_mass = truncation_tail_mass(cfg, g);
  return t;
}

}  // namespace phasecell
