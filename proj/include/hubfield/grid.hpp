#pragma once

// Uniform cell-centered grids on an interval or rectangle, with an optional
// activity mask, and the nonnegative density fields that live on them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hubfield/errors.hpp"

namespace hubfield {

/// Point in the plane; 1D grids use only x and keep y = 0.
using Point = std::array<double, 2>;

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

class Grid {
 public:
  Grid() = default;

  static Grid line(double a, double b, std::size_t n) {
    return Grid(1, {a, 0.0}, {b, 1.0}, {n, 1});
  }

  static Grid rect(double ax, double bx, std::size_t nx, double ay, double by,
                   std::size_t ny) {
    return Grid(2, {ax, ay}, {bx, by}, {nx, ny});
  }

  int dim() const { return dim_; }
  double lo(int axis) const { return lo_[axis]; }
  double hi(int axis) const { return hi_[axis]; }
  std::size_t n(int axis) const { return n_[axis]; }
  double spacing(int axis) const { return h_[axis]; }
  std::size_t size() const { return n_[0] * n_[1]; }

  /// Length (1D) or area (2D) of one cell.
  double cell_measure() const { return dim_ == 1 ? h_[0] : h_[0] * h_[1]; }

  /// Row-major in (i, j): index = i * ny + j.
  std::size_t index(std::size_t i, std::size_t j = 0) const {
    return i * n_[1] + j;
  }
  std::pair<std::size_t, std::size_t> ij(std::size_t k) const {
    return {k / n_[1], k % n_[1]};
  }

  Point center(std::size_t k) const {
    auto [i, j] = ij(k);
    Point c{lo_[0] + (static_cast<double>(i) + 0.5) * h_[0], 0.0};
    if (dim_ == 2) c[1] = lo_[1] + (static_cast<double>(j) + 0.5) * h_[1];
    return c;
  }

  bool has_mask() const { return !mask_.empty(); }
  bool active(std::size_t k) const { return mask_.empty() || mask_[k] != 0; }
  std::size_t active_count() const {
    if (mask_.empty()) return size();
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), 1));
  }

  /// Indices of active cells in increasing order; every summation in the
  /// library runs over this list so results do not depend on scheduling.
  const std::vector<std::size_t>& active_cells() const { return active_; }

  bool contains(const Point& p) const {
    for (int a = 0; a < dim_; ++a)
      if (p[a] < lo_[a] || p[a] > hi_[a]) return false;
    return true;
  }

  /// Cell holding p (points on the upper edge go to the last cell).
  std::size_t locate(const Point& p) const {
    std::array<std::size_t, 2> c{0, 0};
    for (int a = 0; a < dim_; ++a) {
      double t = std::floor((p[a] - lo_[a]) / h_[a]);
      t = std::clamp(t, 0.0, static_cast<double>(n_[a] - 1));
      c[a] = static_cast<std::size_t>(t);
    }
    return index(c[0], c[1]);
  }

  /// Copy of this grid with the given mask (one byte per cell, 1 = active).
  Grid with_mask(std::vector<std::uint8_t> mask) const {
    if (mask.size() != size())
      throw std::invalid_argument("mask size does not match grid");
    for (auto& m : mask) m = m ? 1 : 0;
    Grid g = *this;
    g.mask_ = std::move(mask);
    g.rebuild_active();
    return g;
  }

  /// Activates cells whose centers lie inside the closed polygon (even-odd
  /// rule). Only meaningful for 2D grids.
  Grid with_polygon_mask(std::span<const Point> polygon) const {
    if (dim_ != 2) throw std::invalid_argument("polygon masks require a 2D grid");
    if (polygon.size() < 3)
      throw std::invalid_argument("polygon needs at least 3 vertices");
    std::vector<std::uint8_t> mask(size(), 0);
    for (std::size_t k = 0; k < size(); ++k)
      mask[k] = point_in_polygon(center(k), polygon) ? 1 : 0;
    return with_mask(std::move(mask));
  }

  const std::vector<std::uint8_t>& mask() const { return mask_; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim_ == b.dim_ && a.lo_ == b.lo_ && a.hi_ == b.hi_ &&
           a.n_ == b.n_ && a.mask_ == b.mask_;
  }

  static bool point_in_polygon(const Point& p, std::span<const Point> poly) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      const Point& a = poly[i];
      const Point& b = poly[j];
      if ((a[1] > p[1]) != (b[1] > p[1])) {
        double xc = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
        if (p[0] < xc) inside = !inside;
      }
    }
    return inside;
  }

 private:
  Grid(int dim, std::array<double, 2> lo, std::array<double, 2> hi,
       std::array<std::size_t, 2> n)
      : dim_(dim), lo_(lo), hi_(hi), n_(n) {
    for (int a = 0; a < dim_; ++a) {
      if (!(std::isfinite(lo_[a]) && std::isfinite(hi_[a]) && hi_[a] > lo_[a]))
        throw std::invalid_argument("grid bounds must satisfy b > a");
      if (n_[a] < 2) throw std::invalid_argument("grid needs at least 2 cells per axis");
      h_[a] = (hi_[a] - lo_[a]) / static_cast<double>(n_[a]);
    }
    rebuild_active();
  }

  void rebuild_active() {
    active_.clear();
    for (std::size_t k = 0; k < size(); ++k)
      if (active(k)) active_.push_back(k);
    if (active_.empty()) throw std::invalid_argument("grid has no active cells");
  }

  int dim_ = 1;
  std::array<double, 2> lo_{0.0, 0.0};
  std::array<double, 2> hi_{1.0, 1.0};
  std::array<std::size_t, 2> n_{2, 1};
  std::array<double, 2> h_{0.5, 1.0};
  std::vector<std::uint8_t> mask_;
  std::vector<std::size_t> active_;
};

/// Real-valued field on a grid with no sign constraint (gradients, potentials).
struct ScalarField {
  Grid grid;
  std::vector<double> values;
};

/// Nonnegative density (mass per unit length or area) stored at cell centers.
/// Inactive cells always hold exactly zero.
class DensityField {
 public:
  DensityField() = default;

  explicit DensityField(Grid grid)
      : grid_(std::move(grid)), values_(grid_.size(), 0.0) {}

  DensityField(Grid grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.size())
      throw std::invalid_argument("density has " + std::to_string(values_.size()) +
                                  " values for a grid of " +
                                  std::to_string(grid_.size()) + " cells");
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!grid_.active(k)) {
        values_[k] = 0.0;
        continue;
      }
      if (!(values_[k] >= 0.0) || std::isinf(values_[k]))
        throw DomainError("density value at cell " + std::to_string(k) +
                          " is negative or not finite");
    }
  }

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  std::size_t size() const { return values_.size(); }

  /// Mass held by cell k.
  double cell_mass(std::size_t k) const { return values_[k] * grid_.cell_measure(); }

  double max_value() const {
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
  }

  /// First active cell holding the maximum value.
  std::size_t argmax() const {
    std::size_t best = grid_.active_cells().front();
    for (std::size_t k : grid_.active_cells())
      if (values_[k] > values_[best]) best = k;
    return best;
  }

  DensityField scaled(double factor) const {
    if (!(factor >= 0.0)) throw std::invalid_argument("scale factor must be nonnegative");
    std::vector<double> v(values_);
    for (double& x : v) x *= factor;
    return DensityField(grid_, std::move(v));
  }

  friend bool operator==(const DensityField&, const DensityField&) = default;

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Density of the form sum_j A_j exp(-B_j |X_j - x|^2).
struct GaussianPeak {
  double A = 1.0;
  double B = 1.0;
  Point X{0.0, 0.0};
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

/// Midpoint-rule integral over active cells.
inline double integrate(const DensityField& f) {
  double s = 0.0;
  for (std::size_t k : f.grid().active_cells()) s += f[k];
  return s * f.grid().cell_measure();
}

inline DensityField gaussian_sum_density(std::span<const GaussianPeak> peaks,
                                         const Grid& grid) {
  for (const auto& pk : peaks) {
    if (!(pk.A >= 0.0) || !(pk.B > 0.0))
      throw std::invalid_argument("gaussian peak needs A >= 0 and B > 0");
  }
  std::vector<double> v(grid.size(), 0.0);
  for (std::size_t k : grid.active_cells()) {
    const Point c = grid.center(k);
    double s = 0.0;
    for (const auto& pk : peaks) {
      const double dx = pk.X[0] - c[0];
      const double dy = grid.dim() == 2 ? pk.X[1] - c[1] : 0.0;
      s += pk.A * std::exp(-pk.B * (dx * dx + dy * dy));
    }
    v[k] = s;
  }
  return DensityField(grid, std::move(v));
}

inline DensityField normalize(const DensityField& f, double target_mass = 1.0) {
  if (!(target_mass > 0.0)) throw std::invalid_argument("target mass must be positive");
  const double m = integrate(f);
  if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("degenerate density");
  std::vector<double> v(f.values().begin(), f.values().end());
  const double scale = target_mass / m;
  for (double& x : v) x *= scale;
  return DensityField(f.grid(), std::move(v));
}

/// Density whose value in each active cell is fn(center).
template <class Fn>
DensityField sample_density(const Grid& grid, Fn&& fn) {
  std::vector<double> v(grid.size(), 0.0);
  for (std::size_t k : grid.active_cells()) v[k] = fn(grid.center(k));
  return DensityField(grid, std::move(v));
}

}  // namespace hubfield
