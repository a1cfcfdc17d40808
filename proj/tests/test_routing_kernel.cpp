#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "hubfield/routing_kernel.hpp"

using namespace hubfield;
using hubfield::testing::uniform_density;

TEST(KernelEval, Examples) {
  EXPECT_DOUBLE_EQ(kernel_eval(RoutingKernel(1, 2), {0, 0}, {3, 0}), 9.0);
  EXPECT_DOUBLE_EQ(kernel_eval(RoutingKernel(1, 0.5), {0, 0}, {4, 0}), 2.0);
  EXPECT_DOUBLE_EQ(kernel_eval(RoutingKernel(1, 2), {0, 0}, {3, 4}), 25.0);
  for (double q : {0.3, 1.0, 2.0, 3.7}) EXPECT_EQ(kernel_eval(RoutingKernel(2.5, q), {1, 2}, {1, 2}), 0.0);
  EXPECT_THROW(RoutingKernel(0, 2), std::invalid_argument);
  EXPECT_THROW(RoutingKernel(1, 0), std::invalid_argument);
}

TEST(Convolve, DiracGivesKernel) {
  const auto g = Grid::line(-1, 1, 200);
  std::vector<double> v(g.size(), 0.0);
  const std::size_t k0 = 60;
  v[k0] = 1.0 / g.cell_measure();
  const RoutingKernel V(1.5, 1.3);
  const auto c = convolve(V, DensityField(g, v));
  for (std::size_t k = 0; k < g.size(); ++k)
    EXPECT_NEAR(c[k], V(std::abs(g.center(k)[0] - g.center(k0)[0])), 1e-12);
}

TEST(Convolve, UniformQuadratic) {
  const auto g = Grid::line(-1, 1, 400);
  const auto mu = normalize(uniform_density(g));
  const auto c = convolve(RoutingKernel(1, 2), mu);
  const double h = g.spacing(0);
  for (std::size_t k = 0; k < g.size(); k += 13) {
    const double x = g.center(k)[0];
    EXPECT_NEAR(c[k], x * x + 1.0 / 3.0, h * h);
  }
  const auto z = convolve(RoutingKernel(1, 2), DensityField(g));
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(z[k], 0.0);
}

TEST(Convolve, Linearity) {
  std::mt19937_64 rng(3);
  const auto g = Grid::rect(0, 1, 12, 0, 2, 9);
  const auto m1 = hubfield::testing::random_probability(g, rng);
  const auto m2 = hubfield::testing::random_probability(g, rng);
  const double a = 0.7, b = 2.3;
  std::vector<double> sum(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) sum[k] = a * m1[k] + b * m2[k];
  const RoutingKernel V(1.2, 0.8);
  const auto lhs = convolve(V, DensityField(g, sum));
  const auto c1 = convolve(V, m1), c2 = convolve(V, m2);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(lhs[k], a * c1[k] + b * c2[k], 1e-12 * std::abs(lhs[k]) + 1e-14);
}

TEST(Convolve, TranslationEquivariance) {
  // Shift mu by 3 cells on an enlarged grid; V*mu shifts identically.
  const auto g = Grid::line(0, 1, 50);
  std::vector<double> a(g.size(), 0.0), b(g.size(), 0.0);
  for (std::size_t k = 10; k < 30; ++k) {
    a[k] = 1.0 + 0.1 * static_cast<double>(k % 5);
    b[k + 3] = a[k];
  }
  const RoutingKernel V(1, 1.7);
  const auto ca = convolve(V, DensityField(g, a));
  const auto cb = convolve(V, DensityField(g, b));
  for (std::size_t k = 0; k + 3 < g.size(); ++k) EXPECT_NEAR(cb[k + 3], ca[k], 1e-12);
}

TEST(Convolve, MaskedCellsDoNotContribute) {
  const auto g = Grid::line(0, 1, 4).with_mask({1, 1, 0, 1});
  const DensityField mu(g, {1, 1, 7, 1});
  const auto c = convolve(RoutingKernel(1, 1), mu);
  EXPECT_EQ(c[2], 0.0);
  EXPECT_NEAR(c[0], (0.25 + 0.75) * 0.25, 1e-15);
}

TEST(GradientConvolve, CenteredQuadratic) {
  const auto g = Grid::line(-1, 1, 100);
  const auto nu = sample_density(g, [](const Point& x) { return 3.0 * (1.0 - x[0] * x[0]); });
  const double m = integrate(nu);
  const auto gr = gradient_convolve(RoutingKernel(1, 2), nu);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(gr.values[k], 2.0 * m * g.center(k)[0], 1e-10);
}

TEST(GradientConvolve, OddForSymmetricNu) {
  const auto g = Grid::line(-2, 2, 64);
  const auto nu = sample_density(g, [](const Point& x) { return std::exp(-x[0] * x[0]) + 0.2 * x[0] * x[0]; });
  const auto gr = gradient_convolve(RoutingKernel(0.7, 1.5), nu);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(gr.values[k], -gr.values[g.size() - 1 - k], 1e-10);
  const auto z = gradient_convolve(RoutingKernel(1, 2), DensityField(g));
  for (double v : z.values) EXPECT_EQ(v, 0.0);
}

TEST(GradientConvolve, SingularKernelRejected) {
  const auto g = Grid::line(-1, 1, 10);
  const auto nu = uniform_density(g);
  for (double q : {0.5, 1.0}) {
    try {
      gradient_convolve(RoutingKernel(1, q), nu);
      FAIL();
    } catch (const DomainError& e) {
      EXPECT_STREQ(e.what(), "kernel gradient singular at origin; mass-coupled solver requires q>1");
    }
  }
  EXPECT_THROW(gradient_convolve(RoutingKernel(1, 2), uniform_density(Grid::rect(0, 1, 3, 0, 1, 3))),
               std::invalid_argument);
}

TEST(RoutingEnergy, Examples) {
  const auto g = Grid::line(-1, 1, 400);
  std::vector<double> v(g.size(), 0.0);
  v[123] = 1.0 / g.cell_measure();
  EXPECT_EQ(routing_energy(RoutingKernel(1, 2), DensityField(g, v)), 0.0);
  const auto u = normalize(uniform_density(g));
  EXPECT_NEAR(routing_energy(RoutingKernel(1, 2), u), 2.0 / 3.0, 4 * g.spacing(0) * g.spacing(0));
  EXPECT_EQ(routing_energy(RoutingKernel(1, 2), DensityField(g)), 0.0);
}

TEST(RoutingEnergy, ConsistentWithConvolution) {
  std::mt19937_64 rng(11);
  for (const auto& g : {Grid::line(-1, 2, 37), Grid::rect(0, 1, 9, 0, 1, 11)}) {
    const auto mu = hubfield::testing::random_probability(g, rng);
    for (double q : {0.5, 1.0, 2.0, 2.5}) {
      const RoutingKernel V(1.3, q);
      const auto c = convolve(V, mu);
      double s = 0.0;
      for (std::size_t k : g.active_cells()) s += c[k] * mu[k] * g.cell_measure();
      const double e = routing_energy(V, mu);
      EXPECT_GE(e, 0.0);
      EXPECT_NEAR(e, s, 1e-10 * e);
    }
  }
}

TEST(RoutingEnergy, DiracLikeVanishesUnderRefinement) {
  // Mass spread over a fixed-width core of 2 cells shrinks with h.
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t n : {20u, 40u, 80u, 160u}) {
    const auto g = Grid::line(-1, 1, n);
    std::vector<double> v(n, 0.0);
    v[n / 2 - 1] = v[n / 2] = 0.5 / g.cell_measure();
    const double e = routing_energy(RoutingKernel(1, 2), DensityField(g, v));
    EXPECT_LT(e, prev);
    prev = e;
  }
  EXPECT_LT(prev, 1e-3);
}
