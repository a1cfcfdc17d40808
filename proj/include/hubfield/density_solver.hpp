#pragma once

// Fixed-point solver for the mass-independent location-routing functional
//
//   F_eps(mu) = eps * int rho / mu^{p/d}  +  int int V(x - y) dmu dmu
//
// over probability densities mu on a grid.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hubfield/errors.hpp"
#include "hubfield/fit.hpp"
#include "hubfield/grid.hpp"
#include "hubfield/location_asymptotics.hpp"
#include "hubfield/parallel.hpp"
#include "hubfield/routing_kernel.hpp"

namespace hubfield {

enum class IterationMode {
  derived,       ///< inverse of the first-order condition, exponent 1/(1+p/d)
  paper_literal  ///< (eps rho / (c + V*mu))^{p/d+1}
};

enum class MultiplierMode {
  renormalize,  ///< fixed c = eps^{1/(1+p/d)}, then rescale to unit mass
  bisect        ///< solve the mass equation for c (derived iteration only)
};

struct SolverConfig {
  double eps = 1e-2;
  double p = 1.0;
  int d = 1;
  RoutingKernel kernel{1.0, 2.0};
  IterationMode iteration = IterationMode::derived;
  MultiplierMode multiplier = MultiplierMode::renormalize;
  double tol = 0.02;
  int max_iter = 200;
  double damping = 1.0;

  double ratio() const { return p / d; }
  /// Exponent on the location term in G_eps, (p/d) / (1 + p/d).
  double alpha() const { return ratio() / (1.0 + ratio()); }
  /// Exponent on the routing term in G_eps, 1 / (1 + p/d).
  double beta() const { return 1.0 / (1.0 + ratio()); }

  void validate() const {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be > 0");
    if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument("p must be > 0");
    if (d != 1 && d != 2) throw std::invalid_argument("d must be 1 or 2");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("damping must be in (0,1]");
    if (iteration == IterationMode::paper_literal && multiplier == MultiplierMode::bisect)
      throw std::invalid_argument("bisect multiplier requires the derived iteration");
    // Rebuild through the checked constructor.
    (void)RoutingKernel(kernel.K, kernel.q);
  }
};

struct IterationRecord {
  int iter = 0;
  double change = 0;
  double F = 0;
  double location = 0;
  double routing = 0;
  double c = 0;
};

struct SolveResult {
  DensityField mu;
  int iterations = 0;
  double final_change = std::numeric_limits<double>::infinity();
  double cost_location = 0;  ///< int rho / mu^{p/d}, without eps
  double cost_routing = 0;   ///< int int V d(mu x mu)
  double multiplier = 0;
  bool converged = false;
  double eps = 0;
  std::vector<IterationRecord> history;
  std::vector<std::string> warnings;

  double total_cost() const { return eps * cost_location + cost_routing; }
};

/// Convolution with V restricted to the active cells of one grid. The kernel
/// matrix is cached when it fits comfortably in memory.
class KernelOperator {
 public:
  KernelOperator(const RoutingKernel& V, const Grid& grid) : grid_(grid), V_(V) {
    for (std::size_t k : grid.active_cells()) centers_.push_back(grid.center(k));
    const std::size_t m = centers_.size();
    if (m <= kCacheLimit) {
      matrix_.resize(m * m);
      parallel_for(m, [&](std::size_t a) {
        for (std::size_t b = 0; b < m; ++b) matrix_[a * m + b] = V_(distance(centers_[a], centers_[b]));
      });
    }
  }

  const Grid& grid() const { return grid_; }

  /// (V * mu) at each active cell, in active-cell order.
  std::vector<double> apply(const DensityField& mu) const {
    const std::size_t m = centers_.size();
    const auto& cells = grid_.active_cells();
    const double w = grid_.cell_measure();
    std::vector<double> mass(m);
    for (std::size_t b = 0; b < m; ++b) mass[b] = mu[cells[b]] * w;
    std::vector<double> out(m, 0.0);
    parallel_for(m, [&](std::size_t a) {
      double s = 0.0;
      if (!matrix_.empty()) {
        const double* row = &matrix_[a * m];
        for (std::size_t b = 0; b < m; ++b) s += row[b] * mass[b];
      } else {
        for (std::size_t b = 0; b < m; ++b)
          if (mass[b] != 0.0) s += V_(distance(centers_[a], centers_[b])) * mass[b];
      }
      out[a] = s;
    });
    return out;
  }

  /// int int V d(mu x mu) given a precomputed V * mu.
  double energy(const DensityField& mu, std::span<const double> conv) const {
    const auto& cells = grid_.active_cells();
    double s = 0.0;
    for (std::size_t a = 0; a < cells.size(); ++a) s += conv[a] * mu[cells[a]];
    return s * grid_.cell_measure();
  }

 private:
  static constexpr std::size_t kCacheLimit = 4096;
  Grid grid_;
  RoutingKernel V_;
  std::vector<Point> centers_;
  std::vector<double> matrix_;
};

/// F_eps = eps * location_term + routing_energy.
inline double total_cost_F(const DensityField& rho, const DensityField& mu, const SolverConfig& cfg) {
  require_same_grid(rho.grid(), mu.grid(), "total_cost_F");
  return cfg.eps * location_term(rho, mu, cfg.p, cfg.d) + routing_energy(cfg.kernel, mu);
}

/// G_eps = eps^alpha * location_term + eps^{-beta} * routing_energy; shares
/// its minimizers with F_eps since G_eps = eps^{-beta} F_eps.
inline double rescaled_cost_G(const DensityField& rho, const DensityField& mu, const SolverConfig& cfg) {
  require_same_grid(rho.grid(), mu.grid(), "rescaled_cost_G");
  return std::pow(cfg.eps, cfg.alpha()) * location_term(rho, mu, cfg.p, cfg.d) +
         std::pow(cfg.eps, -cfg.beta()) * routing_energy(cfg.kernel, mu);
}

struct IterationStep {
  DensityField mu;
  double c = 0;
};

namespace detail {

inline DensityField uniform_probability(const Grid& g) {
  const double v = 1.0 / (static_cast<double>(g.active_count()) * g.cell_measure());
  std::vector<double> vals(g.size(), 0.0);
  for (std::size_t k : g.active_cells()) vals[k] = v;
  return DensityField(g, std::move(vals));
}

/// Solves sum_k (a_k / (s + g_k))^beta |cell| = 1 for s > 0, where g_k >= 0
/// and min g_k = 0 over cells with a_k > 0. Bisection runs on log s.
inline double solve_mass_offset(std::span<const double> a, std::span<const double> g, double beta,
                                double w) {
  auto mass = [&](double s) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k] > 0.0) m += std::pow(a[k] / (s + g[k]), beta);
    return m * w;
  };
  const double gmax = *std::max_element(g.begin(), g.end());
  const double s_floor = 1e-14 * std::max(1.0, gmax);
  double lo = 1.0, hi = 1.0;
  while (mass(lo) < 1.0) {
    lo *= 0.5;
    if (lo < s_floor)
      throw DomainError(
          "mass equation unsolvable; density concentrating - reduce eps or use renormalize mode");
  }
  while (mass(hi) > 1.0) {
    hi *= 2.0;
    if (hi > 1e300) throw DomainError("mass equation unsolvable; multiplier diverged");
  }
  for (int it = 0; it < 400 && hi / lo - 1.0 > 1e-15; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (mid <= lo || mid >= hi) break;
    (mass(mid) > 1.0 ? lo : hi) = mid;
  }
  return std::abs(mass(lo) - 1.0) < std::abs(mass(hi) - 1.0) ? lo : hi;
}

/// One update given V * mu_n at the active cells.
inline IterationStep iterate_with(const DensityField& rho, const DensityField& mu_n,
                                  std::span<const double> conv, const SolverConfig& cfg) {
  const Grid& g = rho.grid();
  const auto& cells = g.active_cells();
  const double r = cfg.ratio();
  const double beta = cfg.beta();
  std::vector<double> hat(g.size(), 0.0);
  double c = 0.0;

  if (cfg.iteration == IterationMode::paper_literal) {
    c = std::pow(cfg.eps, beta);
    for (std::size_t a = 0; a < cells.size(); ++a) {
      const std::size_t k = cells[a];
      if (rho[k] > 0.0) hat[k] = std::pow(cfg.eps * rho[k] / (c + conv[a]), r + 1.0);
    }
    const auto normed = normalize(DensityField(g, std::move(hat)));
    hat.assign(normed.values().begin(), normed.values().end());
  } else if (cfg.multiplier == MultiplierMode::renormalize) {
    c = std::pow(cfg.eps, beta);
    for (std::size_t a = 0; a < cells.size(); ++a) {
      const std::size_t k = cells[a];
      if (rho[k] > 0.0) hat[k] = std::pow(cfg.eps * r * rho[k] / (c + 2.0 * conv[a]), beta);
    }
    const auto normed = normalize(DensityField(g, std::move(hat)));
    hat.assign(normed.values().begin(), normed.values().end());
  } else {
    double vmin = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < cells.size(); ++a)
      if (rho[cells[a]] > 0.0) vmin = std::min(vmin, conv[a]);
    std::vector<double> num(cells.size()), gap(cells.size());
    for (std::size_t a = 0; a < cells.size(); ++a) {
      num[a] = cfg.eps * r * rho[cells[a]];
      gap[a] = 2.0 * (conv[a] - vmin);
      if (gap[a] < 0.0) gap[a] = 0.0;
    }
    const double s = solve_mass_offset(num, gap, beta, g.cell_measure());
    c = s - 2.0 * vmin;
    for (std::size_t a = 0; a < cells.size(); ++a)
      if (num[a] > 0.0) hat[cells[a]] = std::pow(num[a] / (s + gap[a]), beta);
  }

  if (cfg.damping < 1.0) {
    for (std::size_t k : cells) hat[k] = (1.0 - cfg.damping) * mu_n[k] + cfg.damping * hat[k];
  }
  return {DensityField(g, std::move(hat)), c};
}

inline double relative_change(const DensityField& prev, const DensityField& next) {
  double diff = 0.0;
  for (std::size_t k : next.grid().active_cells()) diff = std::max(diff, std::abs(next[k] - prev[k]));
  const double scale = next.max_value();
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace detail

/// One fixed-point update mu_n -> mu_{n+1}; returns the new density and the
/// multiplier c that produced it.
///
/// derived:        mu_hat = (eps (p/d) rho / (c + 2 V*mu_n))^{1/(1+p/d)}
/// paper_literal:  mu_hat = (eps rho / (c + V*mu_n))^{p/d+1}
///
/// The derived form inverts the stationarity condition of F_eps,
/// 2 V*mu - eps (p/d) rho mu^{-1-p/d} = -c, so larger routing potential means
/// less mass. Cells with rho = 0 receive no mass.
inline IterationStep iterate_once(const DensityField& rho, const DensityField& mu_n,
                                  const SolverConfig& cfg) {
  cfg.validate();
  require_same_grid(rho.grid(), mu_n.grid(), "iterate_once");
  KernelOperator op(cfg.kernel, rho.grid());
  const auto conv = op.apply(mu_n);
  return detail::iterate_with(rho, mu_n, conv, cfg);
}

inline SolveResult fixed_point_solve(const DensityField& rho, const SolverConfig& cfg) {
  cfg.validate();
  if (cfg.d != rho.grid().dim()) throw std::invalid_argument("d must equal the grid dimension");
  if (!(integrate(rho) > 0.0)) throw DomainError("degenerate density");

  SolveResult res;
  res.eps = cfg.eps;
  if (cfg.eps < 1e-4)
    res.warnings.push_back("eps below 1e-4: expect numerical error as the density concentrates");

  KernelOperator op(cfg.kernel, rho.grid());
  DensityField mu = detail::uniform_probability(rho.grid());
  auto conv = op.apply(mu);

  for (int it = 1; it <= cfg.max_iter; ++it) {
    auto step = detail::iterate_with(rho, mu, conv, cfg);
    const double change = detail::relative_change(mu, step.mu);
    mu = std::move(step.mu);
    conv = op.apply(mu);

    IterationRecord rec;
    rec.iter = it;
    rec.change = change;
    rec.location = location_term(rho, mu, cfg.p, cfg.d);
    rec.routing = op.energy(mu, conv);
    rec.F = cfg.eps * rec.location + rec.routing;
    rec.c = step.c;
    res.history.push_back(rec);

    res.iterations = it;
    res.final_change = change;
    res.cost_location = rec.location;
    res.cost_routing = rec.routing;
    res.multiplier = step.c;
    if (change <= cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.mu = std::move(mu);
  return res;
}

/// Per-iteration log as CSV: iter,change,F,location,routing,c
inline void write_iteration_log(const SolveResult& res, std::ostream& out) {
  out << "iter,change,F,location,routing,c\n";
  char buf[256];
  for (const auto& r : res.history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iter, r.change, r.F,
                  r.location, r.routing, r.c);
    out << buf;
  }
}

struct ScalingResult {
  double slope = 0;
  std::vector<double> eps;
  std::vector<double> min_F;
  std::vector<int> iterations;
};

/// Least-squares slope of log min F_eps against log eps over eps_list.
inline ScalingResult scaling_probe(const DensityField& rho, const SolverConfig& cfg,
                                   std::span<const double> eps_list) {
  if (eps_list.size() < 3) throw std::invalid_argument("scaling_probe needs >= 3 eps values");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] >= 1e-4)) throw std::invalid_argument("scaling_probe: eps values must be >= 1e-4");
    if (i > 0 && !(eps_list[i] < eps_list[i - 1]))
      throw std::invalid_argument("scaling_probe: eps values must be strictly decreasing");
  }
  ScalingResult out;
  std::vector<double> failed;
  for (double e : eps_list) {
    SolverConfig c = cfg;
    c.eps = e;
    const auto r = fixed_point_solve(rho, c);
    if (!r.converged) failed.push_back(e);
    out.eps.push_back(e);
    out.min_F.push_back(r.total_cost());
    out.iterations.push_back(r.iterations);
  }
  if (!failed.empty()) {
    std::ostringstream msg;
    msg << "scaling_probe: solver did not converge for eps =";
    for (double e : failed) msg << ' ' << e;
    throw DomainError(msg.str());
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < out.eps.size(); ++i) {
    lx.push_back(std::log(out.eps[i]));
    ly.push_back(std::log(out.min_F[i]));
  }
  out.slope = least_squares_slope(lx, ly);
  return out;
}

}  // namespace hubfield
