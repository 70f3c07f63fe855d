#include <gtest/gtest.h>

#include <random>

#include "phasecell/gaussian_lattice.hpp"
#include "phasecell/phase_projectors.hpp"
#include "phasecell/window_density.hpp"

using namespace phasecell;

namespace {

// <u f|rho|u h> by tensor Gauss-Legendre over the support cell of f, with
// u(x) = (x - X_n)^power.
cplx brute_form(const PhysConfig& c, const GaussianState& g, const LatticeState& f,
                const LatticeState& h, int panels, int pf = 0, int ph = 0) {
  std::vector<double> x, w;
  const double X = c.X(f.cell_n);
  quad::composite_nodes(X - 0.5 * c.a, X + 0.5 * c.a, panels, 16, x, w);
  std::vector<cplx> fv(x.size()), hv(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    fv[i] = std::pow(x[i] - X, pf) * eval_state_position(c, f, x[i]);
    hv[i] = std::pow(x[i] - X, ph) * eval_state_position(c, h, x[i]);
  }
  cplx s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      s += w[i] * w[j] * std::conj(fv[i]) * g.kernel(x[i], x[j]) * hv[j];
  return s;
}

}  // namespace

TEST(GeoSums, ClosedFormMatchesLoop) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  for (int t = 0; t < 200; ++t) {
    const std::int64_t L = 1 + rng() % 300;
    const double phi = (t % 10 == 0) ? kTwoPi * (rng() % 5) + 1e-4 * u(rng) : u(rng);
    cplx s0, s1, r0 = 0.0, r1 = 0.0;
    detail::geo_sums(L, phi, s0, s1);
    for (std::int64_t j = 0; j < L; ++j) {
      r0 += std::polar(1.0, j * phi);
      r1 += double(j) * std::polar(1.0, j * phi);
    }
    EXPECT_LT(std::abs(s0 - r0), 1e-11 * L);
    EXPECT_LT(std::abs(s1 - r1), 1e-11 * L * L);
  }
}

TEST(GaussianLattice, RemainderAndLevelFormsMatchBruteForce) {
  PhysConfig c;
  c.N = 3;
  c.n_range = {-2, 2};
  c.M_range = {-2, 2};
  const auto g = make_broad_gaussian(0.3, 9.0, 1.2, 12.0, 0.4);
  const auto t = cell_traces(c, g, {true, false, true});
  for (auto [n, M] : {std::pair{0, 0}, {1, 0}, {-1, 1}}) {
    const auto chi = build_remainder_state(c, n, M);
    const auto& f = t.at(n, M);
    EXPECT_NEAR(f.chi, brute_form(c, g, chi, chi, 12).real(), 1e-11) << n << "," << M;
    EXPECT_NEAR(std::abs(f.chi_x1 - brute_form(c, g, chi, chi, 12, 1, 0)), 0.0, 1e-11);
    EXPECT_NEAR(f.chi_xx, brute_form(c, g, chi, chi, 12, 1, 1).real(), 1e-11);
    cplx bx = 0.0;
    double bxx = 0.0;
    for (std::int64_t k = 0; k < 8; ++k) {
      LatticeState e;
      e.cell_n = n;
      e.m_offset = M * 8 + k;
      e.coeffs = Eigen::VectorXcd::Ones(1);
      bx += brute_form(c, g, e, e, 12, 1, 0);
      bxx += brute_form(c, g, e, e, 12, 1, 1).real();
    }
    EXPECT_NEAR(std::abs(f.block_x1 - bx), 0.0, 1e-11);
    EXPECT_NEAR(f.block_xx, bxx, 1e-11);
    for (int K = 1; K <= 3; ++K) {
      double s = 0.0;
      for (std::int64_t m = 0; m < ipow2(3 - K); ++m) {
        const auto lv = build_level_state(c, K, n, M * ipow2(3 - K) + m);
        s += brute_form(c, g, lv, lv, 12).real();
      }
      EXPECT_NEAR(t.at(n, M).level[K - 1], s, 1e-11);
    }
  }
}

TEST(GaussianLattice, AgreesWithWindowBasisPath) {
  PhysConfig c;
  c.N = 2;
  c.n_range = {-2, 2};
  c.M_range = {-3, 3};
  const auto g = make_broad_gaussian(-0.2, 4.0, 0.9, 6.0, -0.3);
  const TraceOptions all{false, true, true};
  const auto ta = cell_traces(c, g, all);
  const auto w = window_density_from_kernel(c, [&](double x, double y) { return g.kernel(x, y); }, 64);
  const auto tb = cell_traces(w, all);
  ta.for_each([&](std::int64_t n, std::int64_t M, const CellForms& f) {
    const auto& h = tb.at(n, M);
    const double pscale = std::pow(c.b() * 8.0, 2);
    EXPECT_NEAR(f.block, h.block, 1e-11);
    EXPECT_NEAR(f.chi, h.chi, 1e-11);
    EXPECT_NEAR(std::abs(f.chi_p1 - h.chi_p1), 0.0, 1e-10 * std::sqrt(pscale));
    EXPECT_NEAR(f.chi_pp, h.chi_pp, 1e-10 * pscale);
    EXPECT_NEAR(f.block_p1, h.block_p1, 1e-10 * std::sqrt(pscale));
    EXPECT_NEAR(f.block_pp, h.block_pp, 1e-10 * pscale);
    for (int K = 0; K < 2; ++K) EXPECT_NEAR(f.level[K], h.level[K], 1e-11);
  });
}

TEST(GaussianLattice, BlockSumsApproachCellMass) {
  PhysConfig c;
  c.N = 2;
  c.n_range = {-1, 1};
  c.M_range = {-200, 200};
  const auto g = make_broad_gaussian(0.1, 0.0, 0.7, 1.5);
  const auto t = cell_traces(c, g);
  for (std::int64_t n = -1; n <= 1; ++n) {
    double s = 0.0;
    for (std::int64_t M = c.M_range.lo; M <= c.M_range.hi; ++M) s += t.at(n, M).block;
    const double mass = g.x_mass(c.X(n) - 0.5, c.X(n) + 0.5);
    EXPECT_NEAR(s, mass, 2e-3) << n;
    EXPECT_LE(s, mass + 1e-12);
  }
}

TEST(GaussianLattice, RejectsUncertaintyViolation) {
  PhysConfig c;
  GaussianState g{0, 0, 0.1, 0.1, 0.0, 1.0};
  EXPECT_THROW(cell_traces(c, g), UncertaintyViolation);
}

TEST(GaussianLattice, BroadStateDeficitNearHalfPower) {
  for (int N : {2, 3}) {
    PhysConfig c;
    c.N = N;
    const double dx = 5.0, dp = 5.0 * std::pow(2.0, N) * c.b();
    c.n_range = {-30, 30};
    const auto Mspan = static_cast<std::int64_t>(std::ceil(6.0 * dp / (std::pow(2.0, N) * c.b())));
    c.M_range = {-Mspan, Mspan};
    const auto t = cell_traces(c, make_broad_gaussian(0.0, 0.0, dx, dp), {false, false, true});
    EXPECT_NEAR(t.sum_prob(), 1.0 - std::pow(2.0, -N), 0.005) << N;
  }
}
