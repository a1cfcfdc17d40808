#pragma once

// Routing cost kernel V(s) = K |s|^q and its grid convolutions.
//
// All sums run directly over active cells in index order, O(M^2) for M
// active cells. The self term uses V(0) = 0.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "hubfield/errors.hpp"
#include "hubfield/grid.hpp"
#include "hubfield/parallel.hpp"

namespace hubfield {

struct RoutingKernel {
  double K = 1.0;
  double q = 2.0;

  RoutingKernel() = default;
  RoutingKernel(double k, double exponent) : K(k), q(exponent) {
    if (!(K > 0.0) || !std::isfinite(K)) throw std::invalid_argument("kernel K must be > 0");
    if (!(q > 0.0) || !std::isfinite(q)) throw std::invalid_argument("kernel q must be > 0");
  }

  double operator()(double r) const {
    if (r == 0.0) return 0.0;
    if (q == 2.0) return K * r * r;
    if (q == 1.0) return K * r;
    return K * std::pow(r, q);
  }
};

inline double kernel_eval(const RoutingKernel& V, const Point& x, const Point& y) {
  return V(distance(x, y));
}

/// (V * mu)(t) = sum_y V(t - y) mu(y) |cell| at arbitrary target points.
inline std::vector<double> convolve_at(const RoutingKernel& V, const DensityField& mu,
                                       std::span<const Point> targets) {
  const Grid& g = mu.grid();
  const double w = g.cell_measure();
  std::vector<Point> src;
  std::vector<double> mass;
  for (std::size_t k : g.active_cells()) {
    if (mu[k] == 0.0) continue;
    src.push_back(g.center(k));
    mass.push_back(mu[k] * w);
  }
  std::vector<double> out(targets.size(), 0.0);
  parallel_for(targets.size(), [&](std::size_t t) {
    double s = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) s += V(distance(targets[t], src[i])) * mass[i];
    out[t] = s;
  });
  return out;
}

/// V * mu evaluated at the active cell centers of mu's own grid.
inline DensityField convolve(const RoutingKernel& V, const DensityField& mu) {
  const Grid& g = mu.grid();
  std::vector<Point> centers;
  centers.reserve(g.active_cells().size());
  for (std::size_t k : g.active_cells()) centers.push_back(g.center(k));
  const auto vals = convolve_at(V, mu, centers);
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t i = 0; i < centers.size(); ++i) out[g.active_cells()[i]] = vals[i];
  return DensityField(g, std::move(out));
}

/// d/dx (V * nu)(t) = sum_y K q |t-y|^{q-1} sign(t-y) nu(y) |cell| for a 1D
/// density, at arbitrary target coordinates.
inline std::vector<double> gradient_convolve_at(const RoutingKernel& V, const DensityField& nu,
                                                std::span<const double> targets) {
  if (nu.grid().dim() != 1) throw std::invalid_argument("gradient_convolve is 1D only");
  if (!(V.q > 1.0))
    throw DomainError(
        "kernel gradient singular at origin; mass-coupled solver requires q>1");
  const Grid& g = nu.grid();
  const double w = g.cell_measure();
  std::vector<double> src, mass;
  for (std::size_t k : g.active_cells()) {
    if (nu[k] == 0.0) continue;
    src.push_back(g.center(k)[0]);
    mass.push_back(nu[k] * w);
  }
  const double kq = V.K * V.q;
  std::vector<double> out(targets.size(), 0.0);
  parallel_for(targets.size(), [&](std::size_t t) {
    double s = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      const double d = targets[t] - src[i];
      if (d == 0.0) continue;
      const double mag = V.q == 2.0 ? std::abs(d) : std::pow(std::abs(d), V.q - 1.0);
      s += kq * (d > 0 ? mag : -mag) * mass[i];
    }
    out[t] = s;
  });
  return out;
}

inline ScalarField gradient_convolve(const RoutingKernel& V, const DensityField& nu) {
  const Grid& g = nu.grid();
  std::vector<double> xs;
  for (std::size_t k : g.active_cells()) xs.push_back(g.center(k)[0]);
  const auto vals = gradient_convolve_at(V, nu, xs);
  ScalarField out{g, std::vector<double>(g.size(), 0.0)};
  for (std::size_t i = 0; i < xs.size(); ++i) out.values[g.active_cells()[i]] = vals[i];
  return out;
}

/// Pairwise routing energy  sum_x sum_y V(x - y) mu(x) mu(y) |cell|^2.
inline double routing_energy(const RoutingKernel& V, const DensityField& mu) {
  const Grid& g = mu.grid();
  const auto& cells = g.active_cells();
  std::vector<double> row(cells.size(), 0.0);
  const double w = g.cell_measure();
  parallel_for(cells.size(), [&](std::size_t a) {
    const std::size_t ka = cells[a];
    if (mu[ka] == 0.0) return;
    const Point pa = g.center(ka);
    double s = 0.0;
    for (std::size_t kb : cells) {
      if (mu[kb] == 0.0) continue;
      s += V(distance(pa, g.center(kb))) * mu[kb];
    }
    row[a] = s * mu[ka];
  });
  double total = 0.0;
  for (double r : row) total += r;
  return total * w * w;
}

}  // namespace hubfield
