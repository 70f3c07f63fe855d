#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "phasecell/errors.hpp"

namespace phasecell {

/// Gaussian density operator given by its first and second moments.
/// cov is the symmetrized covariance <(x - q0)(p - p0) + (p - p0)(x - q0)>/2.
struct GaussianState {
  double q0 = 0.0;
  double p0 = 0.0;
  double var_x = 1.0;
  double var_p = 1.0;
  double cov = 0.0;
  double hbar = 1.0;

  double det() const { return var_x * var_p - cov * cov; }
  /// Conditional momentum spread at fixed position.
  double var_p_cond() const { return var_p - cov * cov / var_x; }
  /// Coherence length of the kernel along x - y.
  double coherence_length() const { return hbar / std::sqrt(var_p_cond()); }
  double slope() const { return cov / var_x; }
  double purity() const { return 0.5 * hbar / std::sqrt(det()); }

  void validate() const {
    if (!(hbar > 0) || !(var_x > 0) || !(var_p > 0) || !std::isfinite(cov))
      throw ValidationError("Gaussian state needs positive variances and hbar");
    if (det() < 0.25 * hbar * hbar * (1.0 - 1e-12))
      throw UncertaintyViolation("Gaussian moments violate the uncertainty bound: det = " +
                                 std::to_string(det()) + " < hbar^2/4");
  }

  /// Position density N(q0, var_x).
  double x_density(double x) const {
    const double d = x - q0;
    return std::exp(-0.5 * d * d / var_x) / std::sqrt(2.0 * std::numbers::pi * var_x);
  }
  double p_density(double p) const {
    const double d = p - p0;
    return std::exp(-0.5 * d * d / var_p) / std::sqrt(2.0 * std::numbers::pi * var_p);
  }

  /// Kernel <x|rho|y>.
  std::complex<double> kernel(double x, double y) const {
    const double s = 0.5 * (x + y), xi = x - y;
    const double pbar = p0 + slope() * (s - q0);
    const double env = x_density(s) * std::exp(-0.5 * var_p_cond() * xi * xi / (hbar * hbar));
    return env * std::polar(1.0, pbar * xi / hbar);
  }

  double wigner(double q, double p) const {
    const double dq = q - q0, dp = p - p0, D = det();
    const double e = (var_p * dq * dq - 2.0 * cov * dq * dp + var_x * dp * dp) / D;
    return std::exp(-0.5 * e) / (2.0 * std::numbers::pi * std::sqrt(D));
  }

  double x_mass(double lo, double hi) const {
    const double s = std::sqrt(2.0 * var_x);
    return 0.5 * (std::erf((hi - q0) / s) - std::erf((lo - q0) / s));
  }
  double p_mass(double lo, double hi) const {
    const double s = std::sqrt(2.0 * var_p);
    return 0.5 * (std::erf((hi - p0) / s) - std::erf((lo - p0) / s));
  }
};

/// Gaussian with centre (q0, p0), spreads (dx, dp) and covariance sigma_xp.
inline GaussianState make_broad_gaussian(double q0, double p0, double dx, double dp,
                                         double sigma_xp = 0.0, double hbar = 1.0) {
  GaussianState g{q0, p0, dx * dx, dp * dp, sigma_xp, hbar};
  g.validate();
  return g;
}

/// Thermal state of an oscillator of mass m and frequency w at temperature kT.
inline GaussianState thermal_oscillator(double mass, double omega, double kT, double hbar = 1.0) {
  if (!(mass > 0) || !(omega > 0) || !(kT > 0))
    throw ValidationError("thermal oscillator needs positive mass, frequency and temperature");
  const double c = 1.0 / std::tanh(hbar * omega / (2.0 * kT));
  GaussianState g{0.0, 0.0, hbar / (2.0 * mass * omega) * c, mass * hbar * omega / 2.0 * c, 0.0, hbar};
  g.validate();
  return g;
}

}  // namespace phasecell
