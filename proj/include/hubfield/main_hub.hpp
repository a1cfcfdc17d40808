#pragma once

// Limit hub functional
//
//   H(x0) = int rho(x)^beta |x - x0|^{alpha q} dx,
//   alpha = (p/d)/(1+p/d),  beta = 1/(1+p/d),
//
// and its minimizer, the main hub. The constant A = (1+p/d)(2d/p)^alpha is
// kept separate since it does not move the minimizer.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hubfield/grid.hpp"
#include "hubfield/parallel.hpp"
#include "hubfield/quadrature.hpp"

namespace hubfield {

struct HubResult {
  Point x0{0.0, 0.0};
  double value = 0;
  DensityField scan;     ///< H evaluated at every active cell center
  bool refined = false;  ///< golden-section refinement improved on the scan
};

inline double hub_constant_A(double p, double d) {
  if (!(p > 0.0) || !(d > 0.0)) throw std::invalid_argument("hub_constant_A: p, d > 0");
  const double r = p / d;
  const double alpha = r / (1.0 + r);
  return (1.0 + r) * std::pow(2.0 * d / p, alpha);
}

namespace detail {

struct HubExponents {
  double beta;   // on rho
  double power;  // alpha * q, on the distance
};

inline HubExponents hub_exponents(double p, int d, double q) {
  if (!(p > 0.0) || !(q > 0.0)) throw std::invalid_argument("hub functional: p, q > 0");
  const double r = p / d;
  return {1.0 / (1.0 + r), q * r / (1.0 + r)};
}

/// int_{u0}^{u1} |u|^s du.
inline double abs_power_integral(double u0, double u1, double s) {
  auto prim = [s](double u) {
    const double v = std::pow(std::abs(u), s + 1.0) / (s + 1.0);
    return u < 0 ? -v : v;
  };
  return prim(u1) - prim(u0);
}

inline const GaussRule& gauss2() {
  static const GaussRule r = gauss_legendre(2);
  return r;
}
inline const GaussRule& gauss3() {
  static const GaussRule r = gauss_legendre(3);
  return r;
}

/// int over [x0,x1]x[y0,y1] of |z - c|^s with `sub` x `sub` panels of `rule`.
inline double rect_power_integral(double x0, double x1, double y0, double y1, const Point& c,
                                  double s, int sub, const GaussRule& rule) {
  const double hx = (x1 - x0) / sub, hy = (y1 - y0) / sub;
  double total = 0.0;
  for (int a = 0; a < sub; ++a) {
    for (int b = 0; b < sub; ++b) {
      const double mx = x0 + (a + 0.5) * hx, my = y0 + (b + 0.5) * hy;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
          const double px = mx + 0.5 * hx * rule.nodes[i] - c[0];
          const double py = my + 0.5 * hy * rule.nodes[j] - c[1];
          total += rule.weights[i] * rule.weights[j] * std::pow(std::hypot(px, py), s);
        }
      }
    }
  }
  return total * 0.25 * hx * hy;
}

}  // namespace detail

/// H(x0) without the constant A. In 1D the density is taken as constant per
/// cell and |x - x0|^s is integrated exactly over each cell; in 2D each cell
/// gets a 2x2 Gauss rule, refined around x0 where the integrand has a kink.
inline double hub_functional(const Point& x0, const DensityField& rho, double p, int d, double q) {
  const Grid& g = rho.grid();
  if (d != g.dim()) throw std::invalid_argument("hub_functional: d must equal grid dim");
  if (!g.contains(x0)) throw std::invalid_argument("hub_functional: x0 outside the grid");
  const auto ex = detail::hub_exponents(p, d, q);
  const double hx = g.spacing(0);
  double total = 0.0;
  if (d == 1) {
    for (std::size_t k : g.active_cells()) {
      if (rho[k] == 0.0) continue;
      const double a = g.lo(0) + static_cast<double>(k) * hx;
      total += std::pow(rho[k], ex.beta) * detail::abs_power_integral(a - x0[0], a + hx - x0[0], ex.power);
    }
    return total;
  }
  const double hy = g.spacing(1);
  const auto [ci, cj] = g.ij(g.locate(x0));
  for (std::size_t k : g.active_cells()) {
    if (rho[k] == 0.0) continue;
    const auto [i, j] = g.ij(k);
    const double xa = g.lo(0) + static_cast<double>(i) * hx;
    const double ya = g.lo(1) + static_cast<double>(j) * hy;
    const bool near = (i + 1 >= ci && i <= ci + 1) && (j + 1 >= cj && j <= cj + 1);
    const double cell = near ? detail::rect_power_integral(xa, xa + hx, ya, ya + hy, x0, ex.power, 8,
                                                           detail::gauss3())
                             : detail::rect_power_integral(xa, xa + hx, ya, ya + hy, x0, ex.power, 1,
                                                           detail::gauss2());
    total += std::pow(rho[k], ex.beta) * cell;
  }
  return total;
}

namespace detail {

template <class Fn>
double golden_section(Fn&& f, double a, double b, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), dd = a + invphi * (b - a);
  double fc = f(c), fd = f(dd);
  while (b - a > tol) {
    if (fc <= fd) {
      b = dd;
      dd = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = dd;
      fc = fd;
      dd = a + invphi * (b - a);
      fd = f(dd);
    }
  }
  return fc <= fd ? c : dd;
}

}  // namespace detail

/// Scans H over active cell centers, then refines the best cell by
/// golden-section search along each axis (two coordinate sweeps) inside its
/// 3-cell neighbourhood, to tolerance h/100. Equal scan values resolve to the
/// lowest cell index.
inline HubResult find_main_hub(const DensityField& rho, double p, int d, double q) {
  const Grid& g = rho.grid();
  if (!(integrate(rho) > 0.0)) throw DomainError("degenerate density");
  const auto& cells = g.active_cells();
  std::vector<double> vals(cells.size());
  parallel_for(cells.size(), [&](std::size_t a) { vals[a] = hub_functional(g.center(cells[a]), rho, p, d, q); });

  std::size_t best = 0;
  for (std::size_t a = 1; a < cells.size(); ++a)
    if (vals[a] < vals[best]) best = a;

  std::vector<double> scan(g.size(), 0.0);
  for (std::size_t a = 0; a < cells.size(); ++a) scan[cells[a]] = vals[a];

  HubResult res;
  res.scan = DensityField(g, std::move(scan));
  const Point start = g.center(cells[best]);
  res.x0 = start;
  res.value = vals[best];

  auto objective = [&](const Point& x) {
    if (!g.contains(x) || !g.active(g.locate(x))) return std::numeric_limits<double>::infinity();
    return hub_functional(x, rho, p, d, q);
  };

  Point x = start;
  for (int sweep = 0; sweep < 2; ++sweep) {
    for (int axis = 0; axis < g.dim(); ++axis) {
      const double h = g.spacing(axis);
      const double a = std::max(g.lo(axis), start[axis] - 1.5 * h);
      const double b = std::min(g.hi(axis), start[axis] + 1.5 * h);
      x[axis] = detail::golden_section(
          [&](double t) {
            Point y = x;
            y[axis] = t;
            return objective(y);
          },
          a, b, h / 100.0);
    }
  }
  const double refined_value = objective(x);
  if (refined_value < res.value) {
    res.x0 = x;
    res.value = refined_value;
    res.refined = true;
  }
  return res;
}

}  // namespace hubfield
