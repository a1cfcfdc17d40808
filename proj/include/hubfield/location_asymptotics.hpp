#pragma once

// Quantization constants and the asymptotic location cost.

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hubfield/errors.hpp"
#include "hubfield/grid.hpp"
#include "hubfield/quadrature.hpp"

namespace hubfield {

/// Midpoint approximation of  sum rho / mu^{p/d} |cell|  over cells with
/// rho > 0. Returns +inf when mu vanishes where rho does not.
inline double location_term(const DensityField& rho, const DensityField& mu, double p, int d) {
  require_same_grid(rho.grid(), mu.grid(), "location_term");
  if (d != rho.grid().dim()) throw std::invalid_argument("location_term: d must equal grid dim");
  const double e = p / d;
  double s = 0.0;
  for (std::size_t k : rho.grid().active_cells()) {
    if (rho[k] == 0.0) continue;
    if (mu[k] == 0.0) return std::numeric_limits<double>::infinity();
    s += rho[k] * (e == 1.0 ? 1.0 / mu[k] : std::pow(mu[k], -e));
  }
  return s * rho.grid().cell_measure();
}

/// C_{p,2} = integral of |x|^p over the unit-area regular hexagon centred at
/// the origin.
///
/// Each of the six triangles (origin, v_k, v_{k+1}) is integrated in polar
/// coordinates about the origin. The radial integral is exact,
///   int_0^{r(t)} r^{p+1} dr = r(t)^{p+2} / (p+2),  r(t) = apothem / cos t,
/// leaving a smooth integral over t in [-pi/6, pi/6]; by symmetry we take
/// twice the half-range. Panels double until the estimate settles.
inline double hexagon_constant(double p) {
  if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("hexagon_constant: p >= 0");
  const double circumradius = std::sqrt(2.0 / (3.0 * std::sqrt(3.0)));
  const double apothem = circumradius * std::sqrt(3.0) / 2.0;
  const auto rule = gauss_legendre(8);
  auto radial = [&](double t) { return std::pow(apothem / std::cos(t), p + 2.0) / (p + 2.0); };
  double prev = 12.0 * integrate_composite(radial, 0.0, std::numbers::pi / 6.0, 1, rule);
  for (int panels = 2; panels <= 1 << 12; panels *= 2) {
    const double cur = 12.0 * integrate_composite(radial, 0.0, std::numbers::pi / 6.0, panels, rule);
    if (std::abs(cur - prev) < 1e-14 * std::max(1.0, std::abs(cur))) return cur;
    prev = cur;
  }
  return prev;
}

/// A C N^{-p/d} int rho / mu^{p/d} with an explicitly supplied quantization
/// constant (any dimension).
inline double limit_location_cost(const DensityField& rho, const DensityField& mu, double N,
                                  double p, int d, double A_coef, double quant_constant) {
  if (!(N > 0.0)) throw std::invalid_argument("limit_location_cost: N must be positive");
  bool any = false;
  for (std::size_t k : rho.grid().active_cells()) any = any || rho[k] > 0.0;
  if (!any) return 0.0;
  return A_coef * quant_constant * std::pow(N, -p / d) * location_term(rho, mu, p, d);
}

/// Planar version using the hexagon constant C_{p,2}.
inline double limit_location_cost(const DensityField& rho, const DensityField& mu, double N,
                                  double p, double A_coef) {
  if (rho.grid().dim() != 2)
    throw std::invalid_argument(
        "limit_location_cost: C_{p,d} is only known for d=2; pass the constant explicitly");
  return limit_location_cost(rho, mu, N, p, 2, A_coef, hexagon_constant(p));
}

/// Minimizer of the pure location term under unit mass:
///   mu*(x) = rho(x)^{d/(d+p)} / int rho^{d/(d+p)}.
inline DensityField optimal_pure_location_density(const DensityField& rho, double p, int d) {
  if (!(p > 0.0)) throw std::invalid_argument("optimal_pure_location_density: p > 0");
  const double e = static_cast<double>(d) / (d + p);
  std::vector<double> v(rho.size(), 0.0);
  for (std::size_t k : rho.grid().active_cells()) v[k] = rho[k] > 0 ? std::pow(rho[k], e) : 0.0;
  return normalize(DensityField(rho.grid(), std::move(v)), 1.0);
}

}  // namespace hubfield
