#include <gtest/gtest.h>

#include <random>

#include "phasecell/phase_projectors.hpp"
#include "phasecell/window_density.hpp"

using namespace phasecell;

namespace {

PhysConfig cfg_n(int N) {
  PhysConfig c;
  c.N = N;
  c.n_range = {-2, 2};
  c.M_range = {-2, 2};
  return c;
}

Eigen::MatrixXcd dense_projector(const WindowDensity& w, const CellProjector& E) {
  Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(w.dim(), w.dim());
  const auto D = E.dim();
  const auto P0 = projector_matrix(E);
  for (std::int64_t i = 0; i < D; ++i)
    for (std::int64_t j = 0; j < D; ++j)
      P(w.index(E.cell.n, E.m_lo() + i), w.index(E.cell.n, E.m_lo() + j)) = P0(i, j);
  return P;
}

}  // namespace

TEST(CellProjector, SingleHalvingMatrix) {
  const auto E = build_cell_projector(cfg_n(1), 0, 0);
  const auto P = projector_matrix(E);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(std::abs(P(i, j) - 0.5), 0.0, 1e-15);
}

TEST(CellProjector, SpectrumAndTrace) {
  for (int N = 1; N <= 7; ++N) {
    const auto E = build_cell_projector(cfg_n(N), 1, -1);
    const auto P = projector_matrix(E);
    EXPECT_NEAR(std::abs(P.trace() - cplx(double(E.trace()))), 0.0, 1e-12);
    EXPECT_LT((P * P - P).norm(), 1e-12);
    EXPECT_LT((P - P.adjoint()).norm(), 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(P);
    const auto ev = es.eigenvalues();
    EXPECT_NEAR(ev(0), 0.0, 1e-12);
    for (Eigen::Index k = 1; k < ev.size(); ++k) EXPECT_NEAR(ev(k), 1.0, 1e-12);
  }
  EXPECT_EQ(build_cell_projector(cfg_n(3), 0, 0).trace(), 7);
}

TEST(CellProjector, LevelStatesAreFixedPoints) {
  const auto c = cfg_n(4);
  const auto E = build_cell_projector(c, 0, 1);
  for (int K = 1; K <= 4; ++K) {
    for (std::int64_t m = 0; m < ipow2(4 - K); ++m) {
      const auto s = build_level_state(c, K, 0, E.m_lo() / ipow2(K) + m);
      const auto Es = apply_projector(E, s);
      EXPECT_NEAR(std::abs(inner_product(s, Es) - 1.0), 0.0, 1e-13);
    }
  }
  const auto Ech = apply_projector(E, E.complement);
  EXPECT_LT(Ech.coeffs.norm(), 1e-14);
}

TEST(CellProjector, ExclusiveAndDenseIdempotent) {
  const auto c = cfg_n(3);
  WindowDensity w(c);
  std::vector<Eigen::MatrixXcd> Ps;
  for (std::int64_t n = -1; n <= 1; ++n)
    for (std::int64_t M = -1; M <= 1; ++M) Ps.push_back(dense_projector(w, build_cell_projector(c, n, M)));
  for (std::size_t i = 0; i < Ps.size(); ++i) {
    EXPECT_LT((Ps[i] * Ps[i] - Ps[i]).norm(), 1e-12);
    for (std::size_t j = 0; j < Ps.size(); ++j)
      if (i != j) EXPECT_LT((Ps[i] * Ps[j]).norm(), 1e-14);
  }
}

TEST(CellProjector, ShiftCovariance) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> d(-2, 2);
  for (int N = 1; N <= 5; ++N) {
    PhysConfig c = cfg_n(N);
    c.M_range = {-6, 6};
    const auto E = build_cell_projector(c, 0, 0);
    for (int t = 0; t < 8; ++t) {
      const int dn = d(rng), dM = d(rng);
      const auto F = shifted_projector(c, E, dn, dM);
      const auto G = build_cell_projector(c, dn, dM);
      EXPECT_EQ(F.cell, G.cell);
      EXPECT_LT((projector_matrix(F) - projector_matrix(G)).norm(), 1e-13);
    }
  }
}

TEST(CellProjector, MomentsMatchMixtureOracle) {
  for (int N = 1; N <= 6; ++N) {
    PhysConfig c = cfg_n(N);
    const std::int64_t M = 1;
    const auto E = build_cell_projector(c, 0, M);
    const auto m = projector_moments(c, E);
    double x1 = 0, x2 = 0, p1 = 0, p2 = 0;
    int count = 0;
    for (int K = 1; K <= N; ++K) {
      for (std::int64_t j = 0; j < ipow2(N - K); ++j) {
        const auto s = build_level_state(c, K, 0, M * ipow2(N - K) + j);
        x1 += position_moment(c, s, 1);
        x2 += position_moment(c, s, 2);
        p1 += exact_momentum_moment(c, s, 1);
        p2 += exact_momentum_moment(c, s, 2);
        ++count;
      }
    }
    ASSERT_EQ(count, E.trace());
    const double tr = double(count);
    EXPECT_NEAR(m.mean_x, x1 / tr, 1e-12);
    EXPECT_NEAR(m.var_x, x2 / tr - (x1 / tr) * (x1 / tr), 1e-12);
    EXPECT_NEAR(m.mean_p, p1 / tr, 1e-9 * std::abs(p1 / tr));
    EXPECT_NEAR(m.var_p, p2 / tr - (p1 / tr) * (p1 / tr), 1e-9 * m.var_p);
  }
}

TEST(CellProjector, MomentumWidthScaling) {
  double prev = 1.0;
  for (int N = 3; N <= 10; ++N) {
    const auto c = cfg_n(N);
    const auto m = projector_moments(c, build_cell_projector(c, 0, 0));
    const double span = std::pow(2.0, N) * c.b();
    const double dev = std::abs(m.var_p / (span * span / 12.0) - 1.0);
    EXPECT_LT(dev, prev) << N;
    prev = dev;
    EXPECT_NEAR(m.var_p_leading, std::pow(2.0, N + 1) * std::numbers::pi * std::numbers::pi / 3.0, 1e-12);
  }
  EXPECT_LT(prev, 0.01);
}

TEST(CellProjector, RecenteringOffset) {
  EXPECT_NEAR(recentering_offset(1) * kTwoPi, std::numbers::pi, 1e-15);
  for (int N = 1; N <= 8; ++N) {
    const auto c = cfg_n(N);
    const auto E = recenter(c, build_cell_projector(c, 0, -1));
    EXPECT_NEAR(E.p_offset, recentering_offset(N), 1e-9) << N;
    EXPECT_NEAR(projector_moments(c, E).mean_p_rel, 0.0, 1e-9);
  }
}

TEST(CellProjector, CommutatorTraceGrowsWithDimension) {
  std::vector<double> xs, ys;
  for (int N = 2; N <= 7; ++N) {
    PhysConfig c = cfg_n(N);
    c.hbar = 0.7;
    const auto r = balian_low_diagnostic(c, build_cell_projector(c, 0, 0));
    EXPECT_NEAR(r.trace_E_commutator.real(), 0.0, 1e-9);
    EXPECT_NEAR(r.trace_E_commutator.imag(), c.hbar * (std::pow(2.0, N) - 1.0), 1e-9 * std::pow(2.0, N));
    EXPECT_NEAR(std::abs(r.chi_channel + r.trace_E_commutator), 0.0, 1e-9 * std::pow(2.0, N));
    EXPECT_NEAR(std::abs(r.block_total), 0.0, 1e-9 * std::pow(2.0, N));
    xs.push_back(r.trace_E);
    ys.push_back(r.trace_E_commutator.imag());
  }
  // least-squares slope through the origin
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += xs[i] * ys[i];
    sxx += xs[i] * xs[i];
  }
  EXPECT_NEAR(sxy / sxx, 0.7, 1e-10);
}

TEST(Deficit, LevelStateAndRemainder) {
  const auto c = cfg_n(3);
  const auto lv = build_level_state(c, 2, 1, 3);
  auto d = exhaustivity_deficit(cell_traces(WindowDensity::pure(c, lv)));
  EXPECT_NEAR(d.deficit, 0.0, 1e-13);
  EXPECT_NEAR(d.chi_sum, 0.0, 1e-13);
  const auto ch = build_remainder_state(c, 0, 1);
  d = exhaustivity_deficit(cell_traces(WindowDensity::pure(c, ch)));
  EXPECT_NEAR(d.deficit, 1.0, 1e-13);
  EXPECT_NEAR(d.chi_sum, 1.0, 1e-13);
}

TEST(Region, ComplementSumsToOneExactly) {
  std::mt19937 rng(5);
  const auto c = cfg_n(3);
  WindowDensity w(c);
  std::normal_distribution<double> g;
  for (int t = 0; t < 4; ++t) {
    LatticeState s;
    s.cell_n = std::uniform_int_distribution<int>(-2, 2)(rng);
    s.m_offset = -16;
    s.coeffs.resize(32);
    for (auto& v : s.coeffs) v = cplx(g(rng), g(rng));
    s.coeffs.normalize();
    w.add(s, 0.25);
  }
  const auto tab = cell_traces(w);
  for (int t = 0; t < 50; ++t) {
    RegionProjector r;
    for (std::int64_t n = -2; n <= 2; ++n)
      for (std::int64_t M = -2; M <= 2; ++M)
        if (rng() % 2) r.cells.insert({n, M});
    const auto p = region_probability(tab, r);
    EXPECT_EQ(p.inside + p.complement, 1.0);
    EXPECT_GE(p.inside, -1e-14);
    EXPECT_LE(p.inside, 1.0 + 1e-14);
  }
}
