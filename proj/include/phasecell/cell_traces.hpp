#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "phasecell/config.hpp"
#include "phasecell/errors.hpp"

namespace phasecell {

using cplx = std::complex<double>;

/// Which per-cell forms a density evaluator should produce.
struct TraceOptions {
  bool x_forms = false;  // position-weighted forms
  bool p_forms = false;  // momentum-weighted forms
  bool levels = false;   // per-level sums
};

/// Quadratic forms of a density operator on one macro-cell (n, M).
/// Coordinates are cell-local: x_loc = x - na, and p_loc acts on the window
/// state psi_{n, 2^N M + j} as multiplication by hbar * 2 pi j / a.
/// "block" sums over the 2^N window states of the cell, "chi" is the
/// remainder state.
struct CellForms {
  double block = 0.0;  // sum_j <e_j|rho|e_j>
  double chi = 0.0;    // <chi|rho|chi>

  cplx block_x1 = 0.0;  // sum_j <x e_j|rho|e_j>
  cplx chi_x1 = 0.0;    // <x chi|rho|chi>
  double block_xx = 0.0;
  double chi_xx = 0.0;

  double block_p1 = 0.0;  // sum_j <p e_j|rho|e_j>
  cplx chi_p1 = 0.0;      // <p chi|rho|chi>
  double block_pp = 0.0;
  double chi_pp = 0.0;

  std::vector<double> level;  // index K-1: sum over level-K states of the cell

  /// Tr(E_cell rho)
  double prob() const { return block - chi; }
};

/// Canonical moments of a density operator.
struct CanonicalMoments {
  double trace = 1.0;
  double mean_x = 0.0;
  double mean_x2 = 0.0;
  double mean_p = 0.0;
  double mean_p2 = 0.0;
};

/// Per-cell forms of a density operator over the whole truncation.
struct CellTraceTable {
  PhysConfig cfg;
  TraceOptions opts;
  std::vector<CellForms> cells;  // n-major, then M
  CanonicalMoments rho;
  double tail_mass = 0.0;  // mass of rho outside the truncation (bound)

  CellTraceTable() = default;
  CellTraceTable(const PhysConfig& c, TraceOptions o)
      : cfg(c), opts(o), cells(static_cast<std::size_t>(c.n_range.size() * c.M_range.size())) {
    if (o.levels)
      for (auto& f : cells) f.level.assign(c.N, 0.0);
  }

  std::size_t index(std::int64_t n, std::int64_t M) const {
    if (!cfg.n_range.contains(n) || !cfg.M_range.contains(M))
      throw TruncationError("cell outside truncation");
    return static_cast<std::size_t>((n - cfg.n_range.lo) * cfg.M_range.size() + (M - cfg.M_range.lo));
  }
  CellForms& at(std::int64_t n, std::int64_t M) { return cells[index(n, M)]; }
  const CellForms& at(std::int64_t n, std::int64_t M) const { return cells[index(n, M)]; }

  template <class F>
  void for_each(F&& f) const {
    for (std::int64_t n = cfg.n_range.lo; n <= cfg.n_range.hi; ++n)
      for (std::int64_t M = cfg.M_range.lo; M <= cfg.M_range.hi; ++M) f(n, M, at(n, M));
  }

  double sum_block() const {
    double s = 0.0;
    for (const auto& c : cells) s += c.block;
    return s;
  }
  double sum_chi() const {
    double s = 0.0;
    for (const auto& c : cells) s += c.chi;
    return s;
  }
  double sum_prob() const {
    double s = 0.0;
    for (const auto& c : cells) s += c.prob();
    return s;
  }
  std::vector<double> sum_levels() const {
    std::vector<double> s(cfg.N, 0.0);
    for (const auto& c : cells)
      for (std::size_t k = 0; k < c.level.size(); ++k) s[k] += c.level[k];
    return s;
  }
};

}  // namespace phasecell
