#pragma once

#include <fftw3.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "phasecell/errors.hpp"
#include "phasecell/gaussian_state.hpp"
#include "phasecell/wigner.hpp"

namespace phasecell {

struct BathParams {
  double mass = 1.0;
  double gamma = 1.0;
  double kT = 1.0;

  double D() const { return 2.0 * mass * gamma * kT; }
  void validate() const {
    if (!(mass > 0.0) || !(gamma > 0.0) || !(kT > 0.0))
      throw ValidationError("bath mass, damping and temperature must be positive");
  }
};

struct PhaseMoments {
  double norm = 0.0;
  double mean_q = 0.0, mean_p = 0.0;
  double var_q = 0.0, var_p = 0.0, cov = 0.0;
};

inline PhaseMoments phase_moments(const WignerGrid& w) {
  PhaseMoments m;
  double sq = 0, sp = 0, sqq = 0, spp = 0, sqp = 0, s0 = 0;
  for (std::int64_t i = 0; i < w.q.count; ++i) {
    const double q = w.q.value(i);
    for (std::int64_t l = 0; l < w.p.count; ++l) {
      const double p = w.p.value(l), v = w.W(i, l).real();
      s0 += v;
      sq += q * v;
      sp += p * v;
      sqq += q * q * v;
      spp += p * p * v;
      sqp += q * p * v;
    }
  }
  m.norm = s0 * w.cell_area();
  m.mean_q = sq / s0;
  m.mean_p = sp / s0;
  m.var_q = sqq / s0 - m.mean_q * m.mean_q;
  m.var_p = spp / s0 - m.mean_p * m.mean_p;
  m.cov = sqp / s0 - m.mean_q * m.mean_p;
  return m;
}

/// Second moments of a Gaussian evolved by free streaming plus momentum
/// diffusion.
inline PhaseMoments predicted_moments(const GaussianState& g, const BathParams& b, double t) {
  const double m = b.mass, D = b.D();
  PhaseMoments r;
  r.norm = 1.0;
  r.mean_q = g.q0 + g.p0 * t / m;
  r.mean_p = g.p0;
  r.var_p = g.var_p + 2.0 * D * t;
  r.cov = g.cov + g.var_p * t / m + D * t * t / m;
  r.var_q = g.var_x + 2.0 * g.cov * t / m + g.var_p * t * t / (m * m) + 2.0 * D * t * t * t / (3.0 * m * m);
  return r;
}

/// Phase-space grid holding a Gaussian over the whole evolution window:
/// q-span >= centre drift + 8 max dx_t, p-span >= 8 max dp_t, power-of-two counts,
/// steps at most half the initial conditional widths.
inline WignerGrid master_grid(const GaussianState& g, const BathParams& b, double t, std::int64_t nq,
                              std::int64_t np) {
  if (nq < 16 || np < 16 || (nq & (nq - 1)) || (np & (np - 1)))
    throw ValidationError("grid counts must be powers of two >= 16");
  const auto end = predicted_moments(g, b, t);
  const double sx = std::max(std::sqrt(g.var_x), std::sqrt(end.var_q));
  const double sp = std::max(std::sqrt(g.var_p), std::sqrt(end.var_p));
  const double qspan = std::abs(g.p0) * t / b.mass + 16.0 * sx;
  const double pspan = 16.0 * sp;
  WignerGrid w;
  w.hbar = g.hbar;
  w.q = centred_axis(g.q0 + 0.5 * g.p0 * t / b.mass, qspan / static_cast<double>(nq), nq);
  w.p = centred_axis(g.p0, pspan / static_cast<double>(np), np);
  if (w.q.step > 0.5 * std::sqrt(g.det() / g.var_p) || w.p.step > 0.5 * std::sqrt(g.det() / g.var_x))
    throw GridTooCoarse("phase-space grid does not resolve the initial state");
  w.W.resize(nq, np);
  for (std::int64_t i = 0; i < nq; ++i)
    for (std::int64_t l = 0; l < np; ++l) w.W(i, l) = g.wigner(w.q.value(i), w.p.value(l));
  return w;
}

namespace detail {

/// Batched real FFT along one axis of a column-major nq x np array.
class AxisFft {
 public:
  AxisFft(int len, int howmany, int stride, int dist)
      : len_(len), howmany_(howmany), stride_(stride), dist_(dist),
        buf_(static_cast<std::size_t>(len) * howmany), spec_(static_cast<std::size_t>(len / 2 + 1) * howmany) {
    int n[] = {len};
    fwd_ = fftw_plan_many_dft_r2c(1, n, howmany, buf_.data(), nullptr, 1, len,
                                  reinterpret_cast<fftw_complex*>(spec_.data()), nullptr, 1, len / 2 + 1,
                                  FFTW_ESTIMATE);
    bwd_ = fftw_plan_many_dft_c2r(1, n, howmany, reinterpret_cast<fftw_complex*>(spec_.data()), nullptr, 1,
                                  len / 2 + 1, buf_.data(), nullptr, 1, len, FFTW_ESTIMATE);
  }
  ~AxisFft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  AxisFft(const AxisFft&) = delete;
  AxisFft& operator=(const AxisFft&) = delete;

  /// mult(batch, mode) multiplies mode `mode` of batch `batch`.
  template <class Mult>
  void apply(double* data, Mult&& mult) {
    for (int b = 0; b < howmany_; ++b)
      for (int i = 0; i < len_; ++i) buf_[b * len_ + i] = data[b * dist_ + i * stride_];
    fftw_execute(fwd_);
    const int nm = len_ / 2 + 1;
    for (int b = 0; b < howmany_; ++b)
      for (int k = 0; k < nm; ++k) spec_[b * nm + k] *= mult(b, k) / static_cast<double>(len_);
    fftw_execute(bwd_);
    for (int b = 0; b < howmany_; ++b)
      for (int i = 0; i < len_; ++i) data[b * dist_ + i * stride_] = buf_[b * len_ + i];
  }

 private:
  int len_, howmany_, stride_, dist_;
  std::vector<double> buf_;
  std::vector<std::complex<double>> spec_;
  fftw_plan fwd_, bwd_;
};

inline void check_edges(const Eigen::MatrixXd& W, double tol) {
  const auto nq = W.rows(), np = W.cols();
  const auto eq = std::max<Eigen::Index>(1, nq / 16), ep = std::max<Eigen::Index>(1, np / 16);
  const double total = W.cwiseAbs().sum();
  double edge = 0.0;
  for (Eigen::Index i = 0; i < nq; ++i)
    for (Eigen::Index l = 0; l < np; ++l)
      if (i < eq || i >= nq - eq || l < ep || l >= np - ep) edge += std::abs(W(i, l));
  if (edge > tol * total) throw DomainOverflow("Wigner function reached the phase-space grid edge");
}

}  // namespace detail

/// Free streaming plus momentum diffusion, dW/dt = -(p/m) dW/dq + D d2W/dp2,
/// by Strang splitting with exact spectral substeps.
inline WignerGrid evolve_master(const WignerGrid& in, const BathParams& bath, double t, int steps,
                                double edge_tol = 1e-8) {
  bath.validate();
  if (steps < 1) throw ValidationError("steps must be positive");
  if (!(t >= 0.0)) throw ValidationError("duration must be non-negative");
  if (!in.is_real()) throw ValidationError("evolution needs a real Wigner function");
  const int nq = static_cast<int>(in.q.count), np = static_cast<int>(in.p.count);
  Eigen::MatrixXd W = in.W.real();
  detail::check_edges(W, edge_tol);
  const double tau = t / steps;
  const double Lq = in.q.step * nq, Lp = in.p.step * np;
  const double D = bath.D();
  detail::AxisFft fq(nq, np, 1, nq);  // columns: fixed p
  detail::AxisFft fp(np, nq, nq, 1);  // rows: fixed q
  std::vector<double> half(np / 2 + 1);
  for (int k = 0; k <= np / 2; ++k) {
    const double kp = kTwoPi * k / Lp;
    half[k] = (2 * k == np) ? 0.0 : std::exp(-D * kp * kp * 0.5 * tau);
  }
  std::vector<std::vector<std::complex<double>>> shear(np, std::vector<std::complex<double>>(nq / 2 + 1));
  for (int l = 0; l < np; ++l) {
    const double shift = in.p.value(l) * tau / bath.mass;
    for (int k = 0; k <= nq / 2; ++k)
      shear[l][k] = (2 * k == nq) ? 0.0 : std::polar(1.0, -kTwoPi * k / Lq * shift);
  }
  auto diffuse = [&] { fp.apply(W.data(), [&](int, int k) { return std::complex<double>(half[k]); }); };
  for (int s = 0; s < steps; ++s) {
    diffuse();
    fq.apply(W.data(), [&](int l, int k) { return shear[l][k]; });
    diffuse();
    detail::check_edges(W, edge_tol);
  }
  WignerGrid out = in;
  out.W = W.cast<cplx>();
  return out;
}

}  // namespace phasecell
