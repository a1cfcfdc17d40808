#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <filesystem>
#include <random>
#include <string>

#include "hubfield/hubfield.hpp"

namespace hubfield::testing {

inline const double kHubX0 = (std::sqrt(2.0) - 2.0) / 4.0;
inline const double kHubValue = std::sqrt(2.0) * kHubX0 * kHubX0 + (std::sqrt(2.0) - 1.0) * kHubX0 +
                                0.5 * (std::sqrt(2.0) + 1.0);

/// Step density on [-1,1]: `left` on [-1,0], `right` on [0,1].
inline DensityField step_density(std::size_t n, double left = 2.0, double right = 1.0) {
  return sample_density(Grid::line(-1.0, 1.0, n),
                        [&](const Point& x) { return x[0] < 0.0 ? left : right; });
}

inline DensityField uniform_density(const Grid& g, double value = 1.0) {
  return sample_density(g, [&](const Point&) { return value; });
}

inline DensityField random_probability(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  return normalize(sample_density(g, [&](const Point&) { return u(rng); }));
}

inline std::string data_path(const std::string& name) {
  return std::string(HUBFIELD_DATA_DIR) + "/" + name;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("hubfield_" + tag + "_" +
                                                       std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  return dir;
}

/// Projected gradient descent on cell masses for min sum rho_k (w_k/h)^{-r} h
/// subject to sum w_k = 1, w_k > 0. Projection onto the simplex by sorting.
inline std::vector<double> projected_gradient_location(const DensityField& rho, double r, int steps) {
  const std::size_t n = rho.size();
  const double h = rho.grid().cell_measure();
  std::vector<double> w(n, 1.0 / static_cast<double>(n)), g(n), y(n);
  auto project = [&](std::vector<double>& v) {
    std::vector<double> s = v;
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0, tau = 0;
    for (std::size_t i = 0; i < n; ++i) {
      cum += s[i];
      const double t = (cum - 1.0) / static_cast<double>(i + 1);
      if (s[i] - t > 0) tau = t;
    }
    for (auto& x : v) x = std::max(x - tau, 1e-12);
  };
  auto f = [&](const std::vector<double>& m) {
    double s = 0;
    for (std::size_t k = 0; k < n; ++k) s += rho[k] * std::pow(m[k] / h, -r) * h;
    return s;
  };
  double step = 1e-3;
  double fw = f(w);
  for (int it = 0; it < steps; ++it) {
    for (std::size_t k = 0; k < n; ++k) g[k] = -r * rho[k] * std::pow(w[k] / h, -r - 1.0);
    for (;;) {
      for (std::size_t k = 0; k < n; ++k) y[k] = w[k] - step * g[k];
      project(y);
      const double fy = f(y);
      if (fy <= fw) {
        w = y;
        fw = fy;
        step *= 1.5;
        break;
      }
      step *= 0.5;
      if (step < 1e-18) return w;
    }
  }
  return w;
}

}  // namespace hubfield::testing
