#pragma once

#include <cmath>
#include <algorithm>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace phasecell::quad {

struct Rule {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

/// Gauss-Legendre rule of order n (Newton iteration on the three-term
/// recurrence). Rules are cached; the cache is guarded for shared use.
inline const Rule& gauss_legendre(int n) {
  static std::map<int, Rule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p1 = z, p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.w[i] = w;
    r.w[n - 1 - i] = w;
  }
  if (n == 1) {
    r.x[0] = 0.0;
    r.w[0] = 2.0;
  }
  return cache.emplace(n, std::move(r)).first->second;
}

/// Composite Gauss-Legendre nodes over [lo, hi] split into `panels` panels.
inline void composite_nodes(double lo, double hi, int panels, int order,
                            std::vector<double>& x, std::vector<double>& w) {
  const Rule& r = gauss_legendre(order);
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double c = lo + (p + 0.5) * h;
    for (int i = 0; i < order; ++i) {
      x.push_back(c + 0.5 * h * r.x[i]);
      w.push_back(0.5 * h * r.w[i]);
    }
  }
}

/// Integral of f over [lo, hi] by a fixed composite rule.
template <class F>
auto integrate(F&& f, double lo, double hi, int panels = 16, int order = 16) {
  const Rule& r = gauss_legendre(order);
  const double h = (hi - lo) / panels;
  decltype(f(lo)) acc{};
  for (int p = 0; p < panels; ++p) {
    const double c = lo + (p + 0.5) * h;
    for (int i = 0; i < order; ++i) acc += 0.5 * h * r.w[i] * f(c + 0.5 * h * r.x[i]);
  }
  return acc;
}

/// Adaptive Gauss-Legendre (order 10 vs 20 comparison) with recursive
/// bisection. A panel is accepted when the two estimates differ by less than
/// max(tol, rel * |estimate|).
template <class F>
double adaptive(F&& f, double lo, double hi, double tol, double rel = 1e-13, int max_depth = 12) {
  const Rule& lo_rule = gauss_legendre(10);
  const Rule& hi_rule = gauss_legendre(20);
  std::function<double(double, double, double, int)> rec =
      [&](double a, double b, double t, int depth) -> double {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < lo_rule.x.size(); ++i)
      s1 += lo_rule.w[i] * f(c + h * lo_rule.x[i]);
    for (std::size_t i = 0; i < hi_rule.x.size(); ++i)
      s2 += hi_rule.w[i] * f(c + h * hi_rule.x[i]);
    s1 *= h;
    s2 *= h;
    if (std::abs(s2 - s1) <= std::max(t, rel * std::abs(s2)) || depth >= max_depth) return s2;
    return rec(a, c, 0.5 * t, depth + 1) + rec(c, b, 0.5 * t, depth + 1);
  };
  return rec(lo, hi, tol, 0);
}

}  // namespace phasecell::quad
