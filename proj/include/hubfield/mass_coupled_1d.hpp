#pragma once

// Mass-dependent routing in one dimension.
//
// The stationarity system
//     A (x - T(x)) + (2B/m) d/dx (V * nu)(x) = 0,      rho = nu(T) T'
// is solved by alternating: given nu, read T off the first equation, then
// push rho forward through T to get the next nu. nu lives on a grid aligned
// with rho's lattice but extended to cover T's image.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hubfield/errors.hpp"
#include "hubfield/grid.hpp"
#include "hubfield/routing_kernel.hpp"

namespace hubfield {

/// Monotone map sampled at the cell centers of a 1D grid.
struct TransportMap1D {
  Grid grid;
  std::vector<double> T;
  bool monotone = false;

  /// phi'(x) = x - T(x), the derivative of the Kantorovich potential.
  std::vector<double> potential_derivative() const {
    std::vector<double> out(T.size());
    for (std::size_t k = 0; k < T.size(); ++k) out[k] = grid.center(k)[0] - T[k];
    return out;
  }

  /// T' by centered differences, one-sided at the two ends.
  std::vector<double> derivative() const {
    const std::size_t n = T.size();
    const double h = grid.spacing(0);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == 0) out[k] = (T[1] - T[0]) / h;
      else if (k + 1 == n) out[k] = (T[n - 1] - T[n - 2]) / h;
      else out[k] = (T[k + 1] - T[k - 1]) / (2.0 * h);
    }
    return out;
  }

  static TransportMap1D identity(const Grid& g) {
    TransportMap1D t{g, std::vector<double>(g.size()), true};
    for (std::size_t k = 0; k < g.size(); ++k) t.T[k] = g.center(k)[0];
    return t;
  }

  /// Builds a map from values and sets the monotone flag.
  static TransportMap1D from_values(const Grid& g, std::vector<double> values) {
    if (g.dim() != 1 || values.size() != g.size())
      throw std::invalid_argument("transport map must match a 1D grid");
    TransportMap1D t{g, std::move(values), true};
    for (std::size_t k = 1; k < t.T.size(); ++k)
      if (!(t.T[k] > t.T[k - 1])) t.monotone = false;
    return t;
  }
};

struct MassCoupledConfig {
  double A = 1.0;
  double B = 0.25;
  double p = 2.0;  ///< exponent of the Wasserstein location cost
  RoutingKernel kernel{1.0, 2.0};
  double tol = 0.02;
  int max_iter = 200;
  double damping = 1.0;  ///< relaxation applied to successive transport maps

  void validate() const {
    if (!(A > 0.0)) throw std::invalid_argument("A must be > 0");
    if (!(B >= 0.0)) throw std::invalid_argument("B must be >= 0");
    if (!(p > 0.0)) throw std::invalid_argument("p must be > 0");
    if (!(kernel.q > 1.0))
      throw DomainError("kernel gradient singular at origin; mass-coupled solver requires q>1");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("damping must be in (0,1]");
  }
};

/// T(x) = x + (2B/(A m)) (grad V * nu)(x) at the centers of `domain`.
inline TransportMap1D transport_map_step(const DensityField& nu, const Grid& domain,
                                         const MassCoupledConfig& cfg) {
  if (nu.grid().dim() != 1 || domain.dim() != 1)
    throw std::invalid_argument("transport_map_step is 1D only");
  const double m = integrate(nu);
  if (!(m > 0.0)) throw DomainError("degenerate density");
  std::vector<double> xs(domain.size());
  for (std::size_t k = 0; k < xs.size(); ++k) xs[k] = domain.center(k)[0];
  const auto grad = gradient_convolve_at(cfg.kernel, nu, xs);
  const double coef = 2.0 * cfg.B / (cfg.A * m);
  std::vector<double> T(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) T[k] = xs[k] + coef * grad[k];
  return TransportMap1D::from_values(domain, std::move(T));
}

inline TransportMap1D transport_map_step(const DensityField& nu, const MassCoupledConfig& cfg) {
  return transport_map_step(nu, nu.grid(), cfg);
}

namespace detail {

/// Piecewise-linear T through the cell centers, extended linearly to the
/// two domain ends.
struct MapKnots {
  std::vector<double> x, t;

  explicit MapKnots(const TransportMap1D& map) {
    const Grid& g = map.grid;
    const std::size_t n = map.T.size();
    const double a = g.lo(0), b = g.hi(0);
    const double x0 = g.center(0)[0], x1 = g.center(1)[0];
    const double xn1 = g.center(n - 1)[0], xn2 = g.center(n - 2)[0];
    x.push_back(a);
    t.push_back(map.T[0] - (map.T[1] - map.T[0]) / (x1 - x0) * (x0 - a));
    for (std::size_t k = 0; k < n; ++k) {
      x.push_back(g.center(k)[0]);
      t.push_back(map.T[k]);
    }
    x.push_back(b);
    t.push_back(map.T[n - 1] + (map.T[n - 1] - map.T[n - 2]) / (xn1 - xn2) * (b - xn1));
  }

  /// T^{-1}(y), clamped to the domain.
  double inverse(double y) const {
    if (y <= t.front()) return x.front();
    if (y >= t.back()) return x.back();
    const auto it = std::upper_bound(t.begin(), t.end(), y);
    const std::size_t j = static_cast<std::size_t>(it - t.begin());
    const double s = (y - t[j - 1]) / (t[j] - t[j - 1]);
    return x[j - 1] + s * (x[j] - x[j - 1]);
  }
};

/// Mass of a piecewise-constant 1D density on [lo, u].
inline double cumulative_mass(const DensityField& rho, double u) {
  const Grid& g = rho.grid();
  const double h = g.spacing(0);
  const double rel = (u - g.lo(0)) / h;
  if (rel <= 0.0) return 0.0;
  const std::size_t n = g.size();
  const std::size_t full = std::min(n, static_cast<std::size_t>(std::floor(rel)));
  double s = 0.0;
  for (std::size_t k = 0; k < full; ++k) s += rho[k];
  s *= h;
  if (full < n) s += rho[full] * (u - (g.lo(0) + static_cast<double>(full) * h));
  return s;
}

}  // namespace detail

/// Density of T#rho: each output cell receives the rho-mass of its preimage
/// under the piecewise-linear T, which is the cell integral of
/// rho(T^{-1}(y)) / T'(T^{-1}(y)). The output grid keeps rho's cell size and
/// lattice and spans T's image.
inline DensityField pushforward_1d(const DensityField& rho, const TransportMap1D& map) {
  const Grid& g = rho.grid();
  if (g.dim() != 1) throw std::invalid_argument("pushforward_1d is 1D only");
  if (!(map.grid == g)) throw std::invalid_argument("pushforward_1d: map and density grids differ");
  if (!map.monotone) throw DomainError("transport map not invertible; reduce B or damping");

  const detail::MapKnots knots(map);
  const double h = g.spacing(0);
  const double a = g.lo(0);
  const long n = static_cast<long>(g.size());
  const long k_lo = static_cast<long>(std::ceil((a - knots.t.front()) / h - 1e-9));
  const long k_hi = static_cast<long>(std::ceil((knots.t.back() - g.hi(0)) / h - 1e-9));
  const long n_out = n + k_lo + k_hi;
  if (n_out < 2) throw DomainError("transport map collapses the domain below two cells");
  const double lo_out = a - static_cast<double>(k_lo) * h;
  const Grid out_grid = Grid::line(lo_out, lo_out + static_cast<double>(n_out) * h,
                                   static_cast<std::size_t>(n_out));

  // Preimages of the output cell boundaries; the outermost ones take the
  // whole domain so no mass is lost to rounding at the ends.
  std::vector<double> cum(static_cast<std::size_t>(n_out) + 1);
  for (long i = 0; i <= n_out; ++i) {
    double u;
    if (i == 0) u = g.lo(0);
    else if (i == n_out) u = g.hi(0);
    else u = knots.inverse(lo_out + static_cast<double>(i) * h);
    cum[static_cast<std::size_t>(i)] = detail::cumulative_mass(rho, u);
  }
  std::vector<double> v(static_cast<std::size_t>(n_out));
  const double w = out_grid.cell_measure();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(0.0, cum[i + 1] - cum[i]) / w;
  return DensityField(out_grid, std::move(v));
}

/// max_x |A (x - T(x)) + (2B/m) (grad V * nu)(x)| over the map's cells.
inline double optimality_residual(const DensityField& nu, const TransportMap1D& map,
                                  const MassCoupledConfig& cfg) {
  const double m = integrate(nu);
  std::vector<double> xs(map.T.size());
  for (std::size_t k = 0; k < xs.size(); ++k) xs[k] = map.grid.center(k)[0];
  const auto grad = gradient_convolve_at(cfg.kernel, nu, xs);
  double r = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k)
    r = std::max(r, std::abs(cfg.A * (xs[k] - map.T[k]) + 2.0 * cfg.B / m * grad[k]));
  return r;
}

struct MassCoupledResult {
  DensityField nu;
  TransportMap1D T;
  int iterations = 0;
  bool converged = false;
  double final_change = std::numeric_limits<double>::infinity();
  std::vector<double> changes;
};

namespace detail {

/// Value of a 1D density at y (0 outside its grid).
inline double value_at(const DensityField& f, double y) {
  const Grid& g = f.grid();
  if (y < g.lo(0) || y > g.hi(0)) return 0.0;
  return f[g.locate({y, 0.0})];
}

inline double relative_change_1d(const DensityField& prev, const DensityField& next) {
  double diff = 0.0;
  for (std::size_t k = 0; k < next.size(); ++k)
    diff = std::max(diff, std::abs(next[k] - value_at(prev, next.grid().center(k)[0])));
  for (std::size_t k = 0; k < prev.size(); ++k)
    diff = std::max(diff, std::abs(prev[k] - value_at(next, prev.grid().center(k)[0])));
  const double scale = next.max_value();
  return scale > 0 ? diff / scale : diff;
}

}  // namespace detail

/// Alternating scheme starting from nu_0 = rho. Stops when the relative
/// sup-norm change of nu drops to cfg.tol; non-convergence is reported in
/// the result.
inline MassCoupledResult mass_coupled_solve(const DensityField& rho, const MassCoupledConfig& cfg) {
  cfg.validate();
  if (rho.grid().dim() != 1) throw std::invalid_argument("mass_coupled_solve is 1D only");
  if (!(integrate(rho) > 0.0)) throw DomainError("degenerate density");

  MassCoupledResult res;
  DensityField nu = rho;
  TransportMap1D T = TransportMap1D::identity(rho.grid());
  for (int it = 1; it <= cfg.max_iter; ++it) {
    TransportMap1D next = transport_map_step(nu, rho.grid(), cfg);
    if (cfg.damping < 1.0) {
      for (std::size_t k = 0; k < next.T.size(); ++k)
        next.T[k] = (1.0 - cfg.damping) * T.T[k] + cfg.damping * next.T[k];
      next = TransportMap1D::from_values(rho.grid(), std::move(next.T));
    }
    DensityField nu_next = pushforward_1d(rho, next);
    const double change = detail::relative_change_1d(nu, nu_next);
    res.changes.push_back(change);
    T = std::move(next);
    nu = std::move(nu_next);
    res.iterations = it;
    res.final_change = change;
    if (change <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.nu = std::move(nu);
  res.T = std::move(T);
  return res;
}

/// W_p^p between two 1D densities of equal mass via their quantile functions,
///   int_0^m |Q_rho(t) - Q_nu(t)|^p dt,
/// where each Q is the exact (piecewise-linear) inverse CDF of a
/// piecewise-constant density. The grids may differ.
inline double wasserstein_1d(const DensityField& rho, const DensityField& nu, double p) {
  if (rho.grid().dim() != 1 || nu.grid().dim() != 1)
    throw std::invalid_argument("wasserstein_1d is 1D only");
  if (!(p > 0.0)) throw std::invalid_argument("wasserstein_1d: p > 0");
  const double m1 = integrate(rho), m2 = integrate(nu);
  if (!(m1 > 0.0) || !(m2 > 0.0)) throw DomainError("degenerate density");
  if (std::abs(m1 - m2) > 1e-8 * std::max(m1, m2))
    throw std::invalid_argument("wasserstein_1d: mass mismatch");

  struct Segment {
    double t0, t1, x0, x1;  // quantile rises linearly from x0 to x1 over [t0, t1]
  };
  auto segments = [](const DensityField& f, double scale) {
    std::vector<Segment> s;
    const Grid& g = f.grid();
    const double h = g.spacing(0);
    double t = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double mk = f[k] * h * scale;
      if (mk <= 0.0) continue;
      const double left = g.lo(0) + static_cast<double>(k) * h;
      s.push_back({t, t + mk, left, left + h});
      t += mk;
    }
    return s;
  };
  const auto sa = segments(rho, 1.0);
  auto sb = segments(nu, m1 / m2);
  sb.back().t1 = sa.back().t1;

  auto q_at = [](const Segment& s, double t) {
    return s.x0 + (s.x1 - s.x0) * ((t - s.t0) / (s.t1 - s.t0));
  };
  auto prim = [p](double u) {
    const double v = std::pow(std::abs(u), p + 1.0) / (p + 1.0);
    return u < 0 ? -v : v;
  };

  double total = 0.0;
  std::size_t i = 0, j = 0;
  double t = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double t_next = std::min(sa[i].t1, sb[j].t1);
    if (t_next > t) {
      const double u0 = q_at(sa[i], t) - q_at(sb[j], t);
      const double u1 = q_at(sa[i], t_next) - q_at(sb[j], t_next);
      const double dt = t_next - t;
      if (std::abs(u1 - u0) > 1e-12 * (std::abs(u0) + std::abs(u1)))
        total += dt * (prim(u1) - prim(u0)) / (u1 - u0);
      else
        total += dt * std::pow(std::abs(0.5 * (u0 + u1)), p);
      t = t_next;
    }
    if (sa[i].t1 <= t_next) ++i;
    if (j < sb.size() && sb[j].t1 <= t_next) ++j;
  }
  return total;
}

/// A W_p^p(rho, nu) + (B/m) int int V d(nu x nu), m = int rho.
inline double total_cost_mass(const DensityField& rho, const DensityField& nu,
                              const MassCoupledConfig& cfg) {
  const double m = integrate(rho);
  return cfg.A * wasserstein_1d(rho, nu, cfg.p) + cfg.B / m * routing_energy(cfg.kernel, nu);
}

}  // namespace hubfield
