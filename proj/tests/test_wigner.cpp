#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "phasecell/grid_io.hpp"
#include "phasecell/phase_projectors.hpp"
#include "phasecell/wigner.hpp"

using namespace phasecell;

namespace {

Axis test_axis(std::int64_t n = 160, double dx = 0.1) { return centred_axis(0.0, dx, n); }

// Gaussian wave packet sampled on the grid.
Eigen::VectorXcd packet(const Axis& x, double q0, double p0, double s) {
  Eigen::VectorXcd v(x.count);
  for (std::int64_t i = 0; i < x.count; ++i) {
    const double d = x.value(i) - q0;
    v(i) = std::exp(-d * d / (4 * s * s)) * std::polar(1.0, p0 * x.value(i));
  }
  return v / std::sqrt(v.squaredNorm() * x.step);
}

GridDensity random_mixture(std::mt19937& rng, const Axis& x, int rank, bool hermitian = true) {
  std::uniform_real_distribution<double> uq(-2.0, 2.0), up(-4.0, 4.0), us(0.6, 1.0), uw(0.1, 1.0);
  Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(x.count, x.count);
  double tw = 0.0;
  for (int r = 0; r < rank; ++r) {
    const auto a = packet(x, uq(rng), up(rng), us(rng));
    const auto b = hermitian ? a : packet(x, uq(rng), up(rng), us(rng));
    const double w = uw(rng);
    tw += w;
    K += w * a * b.adjoint();
  }
  return {x, 1.0, K / tw};
}

}  // namespace

TEST(Wigner, GaussianMarginalsAndNormalization) {
  const auto x = test_axis();
  const auto g = make_broad_gaussian(0.3, 1.0, 0.8, 0.7, 0.2);
  const auto d = sample_gaussian(g, x);
  const auto w = wigner_transform(d);
  EXPECT_NEAR(w.integral().real(), 1.0, 1e-6);
  EXPECT_LT(w.purity(), 1.0 + 1e-6);
  EXPECT_NEAR(w.purity(), g.purity(), 1e-6);
  const auto qm = w.q_marginal();
  for (std::int64_t r = 0; r < w.q.count; ++r) EXPECT_NEAR(qm(r), g.x_density(w.q.value(r)), 1e-6);
  const auto pm = w.p_marginal();
  for (std::int64_t l = 0; l < w.p.count; ++l) EXPECT_NEAR(pm(l), g.p_density(w.p.value(l)), 1e-6);
}

TEST(Wigner, EvenRowsReproduceDiagonalExactly) {
  std::mt19937 rng(2);
  const auto x = test_axis(64, 0.15);
  const auto d = random_mixture(rng, x, 3);
  const auto w = wigner_transform(d);
  const auto qm = w.q_marginal();
  for (std::int64_t i = 0; i < x.count; ++i) EXPECT_NEAR(qm(2 * i), d.K(i, i).real(), 1e-13);
}

TEST(Wigner, MomentumMarginalMatchesDiscreteFourierOracle) {
  std::mt19937 rng(4);
  const auto x = test_axis(64, 0.15);
  const auto d = random_mixture(rng, x, 2);
  const auto w = wigner_transform(d);
  const auto pm = w.p_marginal();
  for (std::int64_t l = 0; l < w.p.count; ++l) {
    cplx s = 0.0;
    for (std::int64_t i = 0; i < x.count; ++i)
      for (std::int64_t j = 0; j < x.count; ++j)
        s += d.K(i, j) * std::polar(1.0, -w.p.value(l) * (x.value(i) - x.value(j)));
    EXPECT_NEAR(pm(l), (s * x.step * x.step / kTwoPi).real(), 1e-12);
  }
}

TEST(Wigner, CoherentStateIsPositive) {
  const auto x = test_axis();
  const auto g = make_broad_gaussian(-0.5, 2.0, std::sqrt(0.5), std::sqrt(0.5));
  const auto w = wigner_transform(sample_gaussian(g, x));
  const double mx = w.W.real().maxCoeff();
  EXPECT_GT(w.W.real().minCoeff(), -1e-10 * mx);
  EXPECT_NEAR(w.purity(), 1.0, 1e-6);
}

TEST(Wigner, PairingIdentityRandomPairs) {
  std::mt19937 rng(7);
  const auto x = test_axis(96, 0.12);
  for (int t = 0; t < 5; ++t) {
    const auto A = random_mixture(rng, x, 2, t % 2 == 0);
    const auto B = random_mixture(rng, x, 3, t % 2 == 0);
    const cplx tr = (A.op() * B.op()).trace();
    const cplx pr = wigner_pairing(wigner_transform(A), wigner_transform(B));
    EXPECT_LT(std::abs(tr - pr), 1e-8 * std::max(1.0, std::abs(tr)));
  }
}

TEST(Wigner, RoundTripRankThree) {
  std::mt19937 rng(9);
  const auto x = test_axis(96, 0.12);
  const auto d = random_mixture(rng, x, 3);
  const auto back = inverse_wigner(wigner_transform(d));
  EXPECT_LT((back.K - d.K).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(back.x.min, x.min, 1e-15);
}

TEST(Wigner, CheckerboardIsFlaggedAsAliased) {
  auto w = wigner_transform(sample_gaussian(make_broad_gaussian(0, 0, 1, 1), test_axis(32, 0.3)));
  for (std::int64_t i = 0; i < w.q.count; ++i)
    for (std::int64_t l = 0; l < w.p.count; ++l) w.W(i, l) = ((i + l) % 2 == 0) ? 1.0 : -1.0;
  EXPECT_THROW(inverse_wigner(w), GridTooCoarse);
}

TEST(Wigner, ThermalStateInvertsToPositiveOperator) {
  const auto g = thermal_oscillator(1.0, 1.0, 2.0);
  const auto x = test_axis(128, 0.12);
  const auto back = inverse_wigner(wigner_transform(sample_gaussian(g, x)));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(back.op());
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-8);
  EXPECT_NEAR(es.eigenvalues().sum(), 1.0, 1e-6);
}

TEST(Wigner, RejectsMomentumRangeBeyondNyquist) {
  const auto d = sample_gaussian(make_broad_gaussian(0, 0, 1, 1), test_axis(32, 0.3));
  EXPECT_THROW(wigner_transform(d, 6.0), GridTooCoarse);
  EXPECT_NO_THROW(wigner_transform(d, 5.0));
}

TEST(Anticommutator, GaussianIdentities) {
  const auto x = test_axis(192, 0.1);
  const auto d = sample_gaussian(make_broad_gaussian(0.2, 0.5, 0.9, 0.8, 0.3), x);
  const auto r = anticommutator_correspondence_check(d);
  EXPECT_LT(r.q_error, 1e-8);
  EXPECT_LT(r.p_error, 1e-8);
  EXPECT_LT(r.commute_error, 1e-8);
}

TEST(Anticommutator, RandomStatesCommute) {
  std::mt19937 rng(13);
  const auto x = test_axis(256, 0.1);
  for (int t = 0; t < 3; ++t) {
    const auto r = anticommutator_correspondence_check(random_mixture(rng, x, 3));
    EXPECT_LT(r.commute_error, 1e-8);
  }
}

TEST(Anticommutator, CatStateWithFringes) {
  const auto x = test_axis(192, 0.1);
  const Eigen::VectorXcd v = packet(x, -2.5, 0.0, 0.7) + packet(x, 2.5, 0.0, 0.7);
  GridDensity d{x, 1.0, v * v.adjoint() / (v.squaredNorm() * x.step)};
  const auto w = wigner_transform(d);
  EXPECT_LT(w.W.real().minCoeff(), -0.1 * w.W.real().maxCoeff());
  const auto r = anticommutator_correspondence_check(d);
  EXPECT_LT(r.q_error, 1e-12);
  EXPECT_LT(r.p_error, 1e-8);
}

TEST(GridProjection, CellProbabilityTwoPaths) {
  PhysConfig c;
  c.N = 2;
  c.n_range = {-3, 3};
  c.M_range = {-2, 1};
  const auto x = centred_axis(0.0, 1.0 / 16.0, 16 * 8 + 1);
  const auto g = make_broad_gaussian(0.2, 3.0, 0.9, 2.0);
  const auto d = sample_gaussian(g, x);
  const auto tab = cell_traces(window_density_from_grid(c, d));
  const auto W = wigner_transform(d);
  for (auto [n, M] : {std::pair{0, 0}, {1, 0}, {-1, -1}}) {
    const auto E = build_cell_projector(c, n, M);
    WindowDensity we(c);
    const auto P = projector_matrix(E);
    for (std::int64_t i = 0; i < E.dim(); ++i)
      for (std::int64_t j = 0; j < E.dim(); ++j)
        we.R(we.index(n, E.m_lo() + i), we.index(n, E.m_lo() + j)) = P(i, j);
    const auto ge = grid_from_window(we, x, 1.0);
    const double pair = wigner_pairing(wigner_transform(ge), W).real();
    EXPECT_NEAR(tab.at(n, M).prob(), pair, 1e-10);
  }
}

TEST(GridIo, CsvAndBinaryRoundTrip) {
  const auto w = wigner_transform(sample_gaussian(make_broad_gaussian(0, 0.3, 1, 0.8), test_axis(24, 0.3)));
  std::stringstream cs;
  write_grid_csv(cs, w);
  EXPECT_EQ(cs.str().substr(0, 6), "q,p,W\n");
  const auto wc = read_grid_csv(cs);
  EXPECT_EQ(wc.q.count, w.q.count);
  EXPECT_EQ(wc.p.count, w.p.count);
  EXPECT_EQ((wc.W - w.W.real().cast<cplx>()).cwiseAbs().maxCoeff(), 0.0);
  std::stringstream bs;
  write_grid_binary(bs, w);
  const std::string raw = bs.str();
  EXPECT_EQ(raw.substr(0, 4), "PCWG");
  const auto wb = read_grid_binary(bs);
  EXPECT_EQ(wb.q.step, w.q.step);
  EXPECT_EQ(wb.p.min, w.p.min);
  EXPECT_EQ((wb.W - w.W.real().cast<cplx>()).cwiseAbs().maxCoeff(), 0.0);
  const std::uint32_t hl = static_cast<unsigned char>(raw[4]) | (static_cast<unsigned char>(raw[5]) << 8);
  EXPECT_EQ(raw.size(), 8 + hl + 8 * w.q.count * w.p.count);
}
