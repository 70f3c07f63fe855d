#include <gtest/gtest.h>

#include <array>

#include "phasecell/master_equation.hpp"

using namespace phasecell;

namespace {

// <q>, <p>, <q^2>, <qp>, <p^2> integrated by RK4 from the moment equations
// of streaming plus momentum diffusion.
std::array<double, 5> moment_ode(const GaussianState& g, double m, double D, double t, int steps) {
  std::array<double, 5> y{g.q0, g.p0, g.var_x + g.q0 * g.q0, g.cov + g.q0 * g.p0, g.var_p + g.p0 * g.p0};
  auto f = [&](const std::array<double, 5>& s) {
    return std::array<double, 5>{s[1] / m, 0.0, 2.0 * s[3] / m, s[4] / m, 2.0 * D};
  };
  const double h = t / steps;
  for (int k = 0; k < steps; ++k) {
    auto add = [&](const std::array<double, 5>& a, const std::array<double, 5>& b, double c) {
      std::array<double, 5> r;
      for (int i = 0; i < 5; ++i) r[i] = a[i] + c * b[i];
      return r;
    };
    const auto k1 = f(y), k2 = f(add(y, k1, h / 2)), k3 = f(add(y, k2, h / 2)), k4 = f(add(y, k3, h));
    for (int i = 0; i < 5; ++i) y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return y;
}

}  // namespace

TEST(MasterEquation, MomentLaws) {
  const BathParams bath{2.0, 0.05, 3.0};
  const auto g = make_broad_gaussian(1.0, 0.5, 2.0, 1.0, 0.8);
  const double t = 6.0;
  auto w = master_grid(g, bath, t, 256, 128);
  const auto m0 = phase_moments(w);
  EXPECT_NEAR(m0.norm, 1.0, 1e-8);
  const auto out = evolve_master(w, bath, t, 60);
  const auto m = phase_moments(out);
  const auto y = moment_ode(g, bath.mass, bath.D(), t, 1000);
  const double var_q = y[2] - y[0] * y[0], var_p = y[4] - y[1] * y[1];
  EXPECT_NEAR(m.var_p / (2.0 * bath.D() * t + g.var_p), 1.0, 1e-3);
  EXPECT_NEAR(m.var_q / var_q, 1.0, 1e-2);
  const double corrected = 2.0 / 3.0 * bath.D() * t * t * t / (bath.mass * bath.mass) +
                           g.var_p * t * t / (bath.mass * bath.mass) + 2.0 * t / bath.mass * g.cov + g.var_x;
  EXPECT_NEAR(m.var_q / corrected, 1.0, 1e-2);
  const double printed = corrected - 2.0 * t / bath.mass * g.cov + 2.0 / bath.mass * g.cov;
  EXPECT_GT(std::abs(m.var_q / printed - 1.0), 0.05);
  EXPECT_NEAR(m.mean_q, y[0], 1e-6);
  EXPECT_NEAR(m.norm, 1.0, 1e-8);
}

TEST(MasterEquation, TracePreservedEachStep) {
  const BathParams bath{1.0, 0.1, 1.0};
  const auto g = make_broad_gaussian(0.0, 0.0, 1.5, 1.0);
  auto w = master_grid(g, bath, 4.0, 128, 128);
  double prev = phase_moments(w).norm;
  for (int s = 0; s < 8; ++s) {
    w = evolve_master(w, bath, 0.5, 1);
    const double now = phase_moments(w).norm;
    EXPECT_NEAR(now, prev, 1e-8);
    prev = now;
    EXPECT_GT(w.q_marginal().minCoeff(), -1e-10);
    EXPECT_GT(w.p_marginal().minCoeff(), -1e-10);
  }
}

TEST(MasterEquation, SplittingErrorIsSecondOrder) {
  const BathParams bath{1.0, 0.2, 1.0};
  const auto g = make_broad_gaussian(0.0, 1.0, 1.0, 1.0, 0.3);
  const double t = 3.0;
  const auto w = master_grid(g, bath, t, 256, 128);
  const auto ref = evolve_master(w, bath, t, 256);
  const double e1 = (evolve_master(w, bath, t, 8).W - ref.W).cwiseAbs().maxCoeff();
  const double e2 = (evolve_master(w, bath, t, 16).W - ref.W).cwiseAbs().maxCoeff();
  EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.2);
}

TEST(MasterEquation, SpreadingExponent) {
  const BathParams bath{1.0, 10.0, 1.0};
  const auto g = make_broad_gaussian(0.0, 0.0, 20.0, 2.0);
  const double T = 40.0;
  auto w = master_grid(g, bath, T, 2048, 1024);
  std::vector<double> lt, lr;
  const int chunks = 8;
  for (int c = 1; c <= chunks; ++c) {
    w = evolve_master(w, bath, T / chunks, 10);
    const double t = T * c / chunks;
    if (t < T / 2) continue;
    const auto m = phase_moments(w);
    lt.push_back(std::log(t));
    lr.push_back(std::log(std::sqrt(m.var_q * m.var_p) / g.hbar));
  }
  double mt = 0, mr = 0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    mt += lt[i];
    mr += lr[i];
  }
  mt /= lt.size();
  mr /= lr.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    sxy += (lt[i] - mt) * (lr[i] - mr);
    sxx += (lt[i] - mt) * (lt[i] - mt);
  }
  EXPECT_NEAR(sxy / sxx, 2.0, 0.02);
}

TEST(MasterEquation, DomainOverflow) {
  const BathParams bath{1.0, 0.5, 1.0};
  const auto g = make_broad_gaussian(0.0, 0.0, 1.0, 1.0);
  const auto w = master_grid(g, bath, 0.5, 64, 64);
  EXPECT_THROW(evolve_master(w, bath, 20.0, 40), DomainOverflow);
}

TEST(MasterEquation, RejectsUnderresolvedGrid) {
  const BathParams bath{1.0, 0.3, 2.0};
  EXPECT_THROW(master_grid(make_broad_gaussian(0.5, 0.2, 1.2, 1.1), bath, 2.0, 64, 64), GridTooCoarse);
}

TEST(MasterEquation, RejectsBadBath) {
  const auto w = master_grid(make_broad_gaussian(0, 0, 1, 1), {1, 1, 1}, 1.0, 64, 128);
  EXPECT_THROW(evolve_master(w, {1.0, -1.0, 1.0}, 1.0, 4), ValidationError);
  EXPECT_THROW(evolve_master(w, {1.0, 1.0, 1.0}, 1.0, 0), ValidationError);
}

TEST(MasterEquation, Deterministic) {
  const BathParams bath{1.0, 0.3, 2.0};
  const auto w = master_grid(make_broad_gaussian(0.5, 0.2, 1.2, 1.1, 0.1), bath, 2.0, 128, 128);
  const auto a = evolve_master(w, bath, 2.0, 10), b = evolve_master(w, bath, 2.0, 10);
  EXPECT_EQ((a.W - b.W).cwiseAbs().maxCoeff(), 0.0);
}
