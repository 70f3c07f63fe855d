#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "phasecell/errors.hpp"
#include "phasecell/gaussian_state.hpp"
#include "phasecell/lattice_states.hpp"
#include "phasecell/window_density.hpp"

namespace phasecell {

/// Uniform axis: value(i) = min + i * step, i < count.
struct Axis {
  double min = 0.0;
  double step = 1.0;
  std::int64_t count = 0;
  double value(std::int64_t i) const { return min + static_cast<double>(i) * step; }
  double max() const { return value(count - 1); }
};

/// Kernel rho(x_i, x_j) on a uniform position grid.
struct GridDensity {
  Axis x;
  double hbar = 1.0;
  Eigen::MatrixXcd K;

  std::int64_t size() const { return x.count; }
  cplx trace() const { return K.trace() * x.step; }
  /// Operator matrix (kernel times the quadrature weight).
  Eigen::MatrixXcd op() const { return K * x.step; }
  static GridDensity from_op(const Axis& x, double hbar, const Eigen::MatrixXcd& A) {
    return {x, hbar, A / x.step};
  }
};

inline Axis centred_axis(double centre, double step, std::int64_t count) {
  return {centre - 0.5 * step * static_cast<double>(count - 1), step, count};
}

template <class Kernel>
GridDensity sample_kernel(const Axis& x, double hbar, Kernel&& rho) {
  GridDensity d{x, hbar, Eigen::MatrixXcd(x.count, x.count)};
  for (std::int64_t i = 0; i < x.count; ++i)
    for (std::int64_t j = 0; j < x.count; ++j) d.K(i, j) = rho(x.value(i), x.value(j));
  return d;
}

inline GridDensity sample_gaussian(const GaussianState& g, const Axis& x) {
  return sample_kernel(x, g.hbar, [&](double a, double b) { return g.kernel(a, b); });
}

/// Position operator on the grid.
inline Eigen::MatrixXcd grid_x(const Axis& x) {
  Eigen::VectorXcd v(x.count);
  for (std::int64_t i = 0; i < x.count; ++i) v(i) = x.value(i);
  return v.asDiagonal();
}

/// Spectral momentum operator on the periodic grid; the Nyquist mode is
/// given zero momentum.
inline Eigen::MatrixXcd grid_p(const Axis& x, double hbar) {
  const auto n = x.count;
  const double L = x.step * static_cast<double>(n);
  const auto h = (n - 1) / 2;
  Eigen::MatrixXcd F(2 * h + 1, n);
  Eigen::VectorXcd k(2 * h + 1);
  for (std::int64_t m = -h; m <= h; ++m) {
    k(m + h) = hbar * kTwoPi * static_cast<double>(m) / L;
    for (std::int64_t i = 0; i < n; ++i)
      F(m + h, i) = std::polar(1.0 / std::sqrt(static_cast<double>(n)),
                               -kTwoPi * static_cast<double>(m * i) / static_cast<double>(n));
  }
  return F.adjoint() * k.asDiagonal() * F;
}

/// Wigner function on a (q, p) grid; complex for non-Hermitian operators.
struct WignerGrid {
  Axis q, p;
  Eigen::MatrixXcd W;  // W(iq, ip)
  double hbar = 1.0;

  bool is_real(double tol = 1e-12) const {
    return W.imag().cwiseAbs().maxCoeff() <= tol * std::max(1.0, W.real().cwiseAbs().maxCoeff());
  }
  double cell_area() const { return q.step * p.step; }
  cplx integral() const { return W.sum() * cell_area(); }
  /// 2 pi hbar times the integral of W^2
  double purity() const { return kTwoPi * hbar * W.real().squaredNorm() * cell_area(); }
  Eigen::VectorXd p_marginal() const { return W.real().colwise().sum().transpose() * q.step; }
  Eigen::VectorXd q_marginal() const { return W.real().rowwise().sum() * p.step; }
};

namespace detail {

/// Separation index d_s (units of the x step) of slot s in a q-row of parity par.
inline std::int64_t wigner_slot_sep(std::int64_t n, std::int64_t s, std::int64_t par) {
  std::int64_t b = -(n - 1);
  if (((b - par) % 2 + 2) % 2 != 0) ++b;
  return b + 2 * s;
}

inline Eigen::MatrixXcd wigner_phase(const Axis& x, const Axis& p, double hbar, std::int64_t par) {
  const auto n = x.count;
  Eigen::MatrixXcd E(n, p.count);
  for (std::int64_t s = 0; s < n; ++s) {
    const double xi = static_cast<double>(wigner_slot_sep(n, s, par)) * x.step;
    for (std::int64_t l = 0; l < p.count; ++l) E(s, l) = std::polar(1.0, -p.value(l) * xi / hbar);
  }
  return E;
}

}  // namespace detail

/// Momentum axis resolved by the discrete transform on a grid of step dx.
inline Axis wigner_p_axis(const Axis& x, double hbar) {
  const double dp = std::numbers::pi * hbar / (static_cast<double>(x.count) * x.step);
  return {-0.5 * std::numbers::pi * hbar / x.step, dp, x.count};
}

/// Discrete Wigner transform. q-rows sit at half steps, (x_i + x_j)/2, and
/// each row is Fourier transformed over the separations x_i - x_j.
/// `p_extent`, if positive, is the momentum half-range the caller needs.
inline WignerGrid wigner_transform(const GridDensity& d, double p_extent = 0.0) {
  const auto n = d.x.count;
  if (n < 2) throw ValidationError("grid needs at least two points");
  WignerGrid w;
  w.hbar = d.hbar;
  w.q = {d.x.min, 0.5 * d.x.step, 2 * n - 1};
  w.p = wigner_p_axis(d.x, d.hbar);
  if (p_extent > -w.p.min) throw GridTooCoarse("momentum range exceeds the grid Nyquist band");
  const double c = d.x.step / (std::numbers::pi * d.hbar);
  w.W.resize(2 * n - 1, n);
  for (std::int64_t par = 0; par < 2; ++par) {
    const auto E = detail::wigner_phase(d.x, w.p, d.hbar, par);
    const auto rows = (2 * n - 1 - par + 1) / 2;
    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(rows, n);
    for (std::int64_t k = 0; k < rows; ++k) {
      const auto r = 2 * k + par;
      for (std::int64_t s = 0; s < n; ++s) {
        const auto sep = detail::wigner_slot_sep(n, s, par);
        const auto i2 = r + sep, j2 = r - sep;
        if (i2 % 2 != 0 || i2 < 0 || j2 < 0) continue;
        const auto i = i2 / 2, j = j2 / 2;
        if (i < n && j < n) S(k, s) = d.K(i, j);
      }
    }
    const Eigen::MatrixXcd R = c * S * E;
    for (std::int64_t k = 0; k < rows; ++k) w.W.row(2 * k + par) = R.row(k);
  }
  return w;
}

/// Inverse of wigner_transform. Content in separation slots that the
/// position grid cannot hold raises GridTooCoarse.
inline GridDensity inverse_wigner(const WignerGrid& w, double alias_tol = 1e-8) {
  const auto n = w.p.count;
  if (w.q.count != 2 * n - 1) throw ValidationError("Wigner grid shape is not a transform grid");
  Axis x{w.q.min, 2.0 * w.q.step, n};
  const Axis pref = wigner_p_axis(x, w.hbar);
  if (std::abs(pref.step - w.p.step) > 1e-12 * pref.step || std::abs(pref.min - w.p.min) > 1e-12 * pref.step)
    throw ValidationError("Wigner momentum axis does not match the position grid");
  const double c = x.step / (std::numbers::pi * w.hbar);
  GridDensity d{x, w.hbar, Eigen::MatrixXcd::Zero(n, n)};
  double bad = 0.0, good = 0.0;
  for (std::int64_t par = 0; par < 2; ++par) {
    const Eigen::MatrixXcd E = detail::wigner_phase(x, w.p, w.hbar, par);
    const auto rows = (2 * n - 1 - par + 1) / 2;
    Eigen::MatrixXcd Wr(rows, n);
    for (std::int64_t k = 0; k < rows; ++k) Wr.row(k) = w.W.row(2 * k + par);
    const Eigen::MatrixXcd S = Wr * E.adjoint() / (c * static_cast<double>(n));
    for (std::int64_t k = 0; k < rows; ++k) {
      const auto r = 2 * k + par;
      for (std::int64_t s = 0; s < n; ++s) {
        const auto sep = detail::wigner_slot_sep(n, s, par);
        const auto i2 = r + sep, j2 = r - sep;
        const bool ok = i2 % 2 == 0 && i2 >= 0 && j2 >= 0 && i2 / 2 < n && j2 / 2 < n;
        if (ok) {
          d.K(i2 / 2, j2 / 2) = S(k, s);
          good = std::max(good, std::abs(S(k, s)));
        } else {
          bad = std::max(bad, std::abs(S(k, s)));
        }
      }
    }
  }
  if (bad > alias_tol * std::max(good, 1e-300))
    throw GridTooCoarse("Wigner data has content outside the representable separations");
  return d;
}

struct AnticommutatorReport {
  double q_error = 0.0;        // max |W[(x rho + rho x)/2] - q W| / max |W|
  double p_error = 0.0;        // same for p
  double commute_error = 0.0;  // max |L_x L_p rho - L_p L_x rho| / max |rho|
};

/// Checks that the symmetrized products with x and p act on W as
/// multiplication by q and p.
inline AnticommutatorReport anticommutator_correspondence_check(const GridDensity& d) {
  const Eigen::MatrixXcd X = grid_x(d.x), P = grid_p(d.x, d.hbar);
  const Eigen::MatrixXcd R = d.op();
  const Eigen::MatrixXcd Ax = 0.5 * (X * R + R * X), Ap = 0.5 * (P * R + R * P);
  const auto W = wigner_transform(d);
  const auto Wx = wigner_transform(GridDensity::from_op(d.x, d.hbar, Ax));
  const auto Wp = wigner_transform(GridDensity::from_op(d.x, d.hbar, Ap));
  Eigen::MatrixXcd qW = W.W, pW = W.W;
  for (std::int64_t i = 0; i < W.q.count; ++i)
    for (std::int64_t l = 0; l < W.p.count; ++l) {
      qW(i, l) *= W.q.value(i);
      pW(i, l) *= W.p.value(l);
    }
  const double sq = (qW).cwiseAbs().maxCoeff(), sp = pW.cwiseAbs().maxCoeff();
  AnticommutatorReport r;
  r.q_error = (Wx.W - qW).cwiseAbs().maxCoeff() / std::max(sq, 1e-300);
  r.p_error = (Wp.W - pW).cwiseAbs().maxCoeff() / std::max(sp, 1e-300);
  const Eigen::MatrixXcd xp = 0.5 * (X * Ap + Ap * X), px = 0.5 * (P * Ax + Ax * P);
  r.commute_error = (xp - px).cwiseAbs().maxCoeff() /
                    std::max((0.5 * (X * Ap + Ap * X)).cwiseAbs().maxCoeff(), 1e-300);
  return r;
}

/// Projection onto the truncated window basis by the grid quadrature
/// sum_i dx psi*(x_i) K(x_i, x_j) psi(x_j). Requires a / dx to be an integer
/// and lattice cell edges to fall on grid points.
inline WindowDensity window_density_from_grid(const PhysConfig& cfg, const GridDensity& d) {
  const double ratio = cfg.a / d.x.step;
  const auto per = static_cast<std::int64_t>(std::llround(ratio));
  if (per < 2 || std::abs(ratio - static_cast<double>(per)) > 1e-9)
    throw ValidationError("lattice spacing must be an integer multiple of the grid step");
  WindowDensity w(cfg);
  const auto kd = w.kdim();
  const auto wr = cfg.window_range();
  const auto nc = cfg.n_range.size();
  Eigen::MatrixXcd U = Eigen::MatrixXcd::Zero(d.x.count, nc * kd);
  for (std::int64_t i = 0; i < d.x.count; ++i) {
    const double x = d.x.value(i);
    for (std::int64_t c = 0; c < nc; ++c) {
      const std::int64_t n = cfg.n_range.lo + c;
      if (std::abs(x - cfg.X(n)) > 0.5 * cfg.a * (1.0 + 1e-12)) continue;
      for (std::int64_t k = 0; k < kd; ++k)
        U(i, c * kd + k) = d.x.step * eval_window_position(cfg, {n, wr.lo + k}, x);
    }
  }
  w.R = U.adjoint() * d.K * U;
  return w;
}

/// Operator kernel of a window-basis matrix on a position grid.
inline GridDensity grid_from_window(const WindowDensity& w, const Axis& x, double hbar) {
  const auto kd = w.kdim();
  const auto wr = w.cfg.window_range();
  const auto nc = w.cfg.n_range.size();
  Eigen::MatrixXcd U = Eigen::MatrixXcd::Zero(x.count, nc * kd);
  for (std::int64_t i = 0; i < x.count; ++i)
    for (std::int64_t c = 0; c < nc; ++c)
      for (std::int64_t k = 0; k < kd; ++k)
        U(i, c * kd + k) = eval_window_position(w.cfg, {w.cfg.n_range.lo + c, wr.lo + k}, x.value(i));
  return {x, hbar, U * w.R * U.adjoint()};
}

/// 2 pi hbar * sum W_A W_B dq dp
inline cplx wigner_pairing(const WignerGrid& A, const WignerGrid& B) {
  return kTwoPi * A.hbar * (A.W.cwiseProduct(B.W)).sum() * A.cell_area();
}

}  // namespace phasecell
