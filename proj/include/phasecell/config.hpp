#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "phasecell/errors.hpp"

namespace phasecell {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Inclusive integer interval.
struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  std::int64_t size() const { return hi - lo + 1; }
  bool contains(std::int64_t v) const { return v >= lo && v <= hi; }
  bool empty() const { return hi < lo; }
};

/// Position cell n, window (momentum lattice) index m.
struct LatticeIndex {
  std::int64_t n = 0;
  std::int64_t m = 0;
};

/// Macro-cell coordinates: position cell n, macro momentum cell M
/// (2^N consecutive window indices starting at 2^N M).
struct CellIndex {
  std::int64_t n = 0;
  std::int64_t M = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Physical constants and truncation of the lattice.
struct PhysConfig {
  double hbar = 1.0;
  double a = 1.0;           // cell length
  int N = 3;                // halving depth
  IntRange n_range{-4, 4};  // position cells
  IntRange M_range{-4, 4};  // macro momentum cells
  int quad_points = 16;     // oracle resolution hint

  /// Momentum lattice spacing b = 2πħ/a.
  double b() const { return kTwoPi * hbar / a; }
  std::int64_t cell_dim() const { return std::int64_t{1} << N; }
  /// Window indices covered by the truncation.
  IntRange window_range() const {
    return {M_range.lo * cell_dim(), (M_range.hi + 1) * cell_dim() - 1};
  }
  /// Window index → macro-cell index (floor division).
  std::int64_t macro_of(std::int64_t m) const {
    const auto d = cell_dim();
    return m >= 0 ? m / d : -((-m + d - 1) / d);
  }
  double X(std::int64_t n) const { return static_cast<double>(n) * a; }
  /// Unshifted macro-cell momentum label M·2^N·b.
  double P(std::int64_t M) const {
    return static_cast<double>(M) * static_cast<double>(cell_dim()) * b();
  }

  void validate() const {
    if (!(hbar > 0.0) || !std::isfinite(hbar))
      throw ValidationError("hbar must be positive");
    if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("a must be positive");
    if (N < 1 || N > 24) throw ValidationError("N must lie in [1, 24]");
    if (n_range.empty() || M_range.empty())
      throw ValidationError("truncation ranges must be nonempty");
    if (quad_points < 2) throw ValidationError("quad_points must be >= 2");
  }
};

}  // namespace phasecell
