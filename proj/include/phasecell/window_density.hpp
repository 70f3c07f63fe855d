#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "phasecell/cell_traces.hpp"
#include "phasecell/lattice_states.hpp"
#include "phasecell/quadrature.hpp"

namespace phasecell {

/// Density operator as a dense matrix over the truncated window basis.
/// Basis order: cell n (outer), then window index k.
struct WindowDensity {
  PhysConfig cfg;
  Eigen::MatrixXcd R;

  WindowDensity() = default;
  explicit WindowDensity(const PhysConfig& c) : cfg(c) {
    R = Eigen::MatrixXcd::Zero(dim(), dim());
  }

  std::int64_t kdim() const { return cfg.window_range().size(); }
  std::int64_t dim() const { return cfg.n_range.size() * kdim(); }
  std::int64_t index(std::int64_t n, std::int64_t k) const {
    if (!cfg.n_range.contains(n) || !cfg.window_range().contains(k))
      throw TruncationError("window index outside truncation");
    return (n - cfg.n_range.lo) * kdim() + (k - cfg.window_range().lo);
  }
  /// Dense vector of a lattice state.
  Eigen::VectorXcd embed(const LatticeState& s) const {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim());
    for (Eigen::Index j = 0; j < s.coeffs.size(); ++j) v(index(s.cell_n, s.m_offset + j)) = s.coeffs(j);
    return v;
  }
  double trace() const { return R.trace().real(); }

  static WindowDensity pure(const PhysConfig& c, const LatticeState& s) {
    WindowDensity d(c);
    const Eigen::VectorXcd v = d.embed(s);
    d.R = v * v.adjoint() / v.squaredNorm();
    return d;
  }
  void add(const LatticeState& s, double weight) {
    const Eigen::VectorXcd v = embed(s);
    R += weight * v * v.adjoint();
  }
};

/// Matrix elements <psi_{nk}|rho|psi_{n'k'}> of a kernel rho(x, y) by
/// Gauss-Legendre quadrature on each pair of cells. Cell pairs whose kernel
/// is below `skip` everywhere on a coarse probe are left zero.
template <class Kernel>
WindowDensity window_density_from_kernel(const PhysConfig& cfg, Kernel&& rho, int nodes_per_cell,
                                         double skip = 1e-17) {
  WindowDensity d(cfg);
  const auto kd = d.kdim();
  const auto wr = cfg.window_range();
  const auto& r = quad::gauss_legendre(nodes_per_cell);
  const int Q = nodes_per_cell;
  // U(i, k) = w_i * conj(psi_k(x_i)) / sqrt(a), local coordinates
  Eigen::MatrixXcd U(Q, kd);
  std::vector<double> xl(Q);
  for (int i = 0; i < Q; ++i) {
    xl[i] = 0.5 * cfg.a * r.x[i];
    const double w = 0.5 * cfg.a * r.w[i];
    for (std::int64_t k = 0; k < kd; ++k) {
      const double ph = kTwoPi * static_cast<double>(wr.lo + k) * xl[i] / cfg.a;
      U(i, k) = w * std::polar(1.0 / std::sqrt(cfg.a), -ph);
    }
  }
  const auto nc = cfg.n_range.size();
  Eigen::MatrixXcd D(Q, Q);
  for (std::int64_t a = 0; a < nc; ++a) {
    for (std::int64_t b = a; b < nc; ++b) {
      const double X = cfg.X(cfg.n_range.lo + a), Y = cfg.X(cfg.n_range.lo + b);
      double mx = 0.0;
      for (int i = 0; i < Q; ++i)
        for (int j = 0; j < Q; ++j) {
          D(i, j) = rho(X + xl[i], Y + xl[j]);
          mx = std::max(mx, std::abs(D(i, j)));
        }
      if (mx < skip) continue;
      const Eigen::MatrixXcd blk = U.transpose() * D * U.conjugate();
      // blk(k, k') = sum_ij w_i w_j psi_k*(x_i) rho psi_k'(y_j)
      d.R.block(a * kd, b * kd, kd, kd) = blk;
      if (b != a) d.R.block(b * kd, a * kd, kd, kd) = blk.adjoint();
    }
  }
  return d;
}

/// Per-cell forms of a window-basis density. Position forms use the
/// closed-form position matrix restricted to the truncated window range.
inline CellTraceTable cell_traces(const WindowDensity& d, TraceOptions opt = {}) {
  const PhysConfig& cfg = d.cfg;
  CellTraceTable t(cfg, opt);
  const auto kd = d.kdim();
  const auto wr = cfg.window_range();
  const auto D = cfg.cell_dim();
  const Eigen::MatrixXcd X = x_local_matrix(cfg.a, kd);
  const Eigen::MatrixXcd X2 = x2_local_matrix(cfg.a, kd);
  Eigen::VectorXd pl(D);
  for (std::int64_t j = 0; j < D; ++j) pl(j) = cfg.b() * static_cast<double>(j);
  Eigen::VectorXcd chi(D);
  for (std::int64_t j = 0; j < D; ++j) chi(j) = std::pow(2.0, -0.5 * cfg.N) * parity(j);

  std::vector<Eigen::VectorXcd> fid;
  if (opt.levels)
    for (int K = 1; K <= cfg.N; ++K) fid.push_back(build_level_state(cfg, K, cfg.n_range.lo, cfg.M_range.lo).coeffs);

  CanonicalMoments mom{0, 0, 0, 0, 0};
  for (std::int64_t n = cfg.n_range.lo; n <= cfg.n_range.hi; ++n) {
    const auto base = (n - cfg.n_range.lo) * kd;
    const Eigen::MatrixXcd Rn = d.R.block(base, base, kd, kd);
    const double Xn = cfg.X(n);
    const double trn = Rn.trace().real();
    const cplx tx = (X * Rn).trace();
    const cplx tx2 = (X2 * Rn).trace();
    mom.trace += trn;
    mom.mean_x += Xn * trn + tx.real();
    mom.mean_x2 += Xn * Xn * trn + 2.0 * Xn * tx.real() + tx2.real();
    for (std::int64_t k = 0; k < kd; ++k) {
      const double p = cfg.b() * static_cast<double>(wr.lo + k);
      mom.mean_p += p * Rn(k, k).real();
      mom.mean_p2 += p * p * Rn(k, k).real();
    }
    Eigen::MatrixXcd XR, XRX;
    if (opt.x_forms) {
      XR = X * Rn;
      XRX = XR * X;
    }
    for (std::int64_t M = cfg.M_range.lo; M <= cfg.M_range.hi; ++M) {
      auto& f = t.at(n, M);
      const auto o = M * D - wr.lo;
      const Eigen::MatrixXcd B = Rn.block(o, o, D, D);
      f.block = B.trace().real();
      f.chi = chi.dot(B * chi).real();
      if (opt.x_forms) {
        f.block_x1 = XR.block(o, o, D, D).trace();
        f.block_xx = XRX.block(o, o, D, D).trace().real();
        Eigen::VectorXcd c = Eigen::VectorXcd::Zero(kd);
        c.segment(o, D) = chi;
        const Eigen::VectorXcd xc = X * c;
        f.chi_x1 = xc.dot(Rn * c);
        f.chi_xx = xc.dot(Rn * xc).real();
      }
      if (opt.p_forms) {
        f.block_p1 = (pl.asDiagonal() * B).trace().real();
        f.block_pp = (pl.cwiseProduct(pl).asDiagonal() * B).trace().real();
        const Eigen::VectorXcd pc = pl.cwiseProduct(chi);
        f.chi_p1 = pc.dot(B * chi);
        f.chi_pp = pc.dot(B * pc).real();
      }
      if (opt.levels) {
        for (int K = 1; K <= cfg.N; ++K) {
          const auto len = ipow2(K);
          double s = 0.0;
          for (std::int64_t m = 0; m < ipow2(cfg.N - K); ++m) {
            const auto& v = fid[K - 1];
            s += v.dot(B.block(m * len, m * len, len, len) * v).real();
          }
          f.level[K - 1] = s;
        }
      }
    }
  }
  const double tr = mom.trace;
  t.rho = {tr, mom.mean_x / tr, mom.mean_x2 / tr, mom.mean_p / tr, mom.mean_p2 / tr};
  t.tail_mass = 0.0;
  return t;
}

}  // namespace phasecell
