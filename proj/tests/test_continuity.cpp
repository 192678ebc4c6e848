#include <gtest/gtest.h>

#include <cmath>

#include "ordflow/continuity.hpp"
#include "ordflow/error.hpp"
#include "ordflow/parallel.hpp"

using namespace ordflow;

namespace {

ScalarFn interval(double a, double b, double height = 1.0) {
  return [=](std::span<const double> x) { return x[0] >= a && x[0] <= b ? height : 0.0; };
}

PushforwardOptions particles(std::size_t n, std::uint64_t seed = 7) {
  PushforwardOptions o;
  o.particles = n;
  o.seed = seed;
  return o;
}

}  // namespace

TEST(Pushforward, SignFieldOpensVacuum) {
  const Grid g = Grid::line(-3, 3, 601);
  const double h = g.spacing(0);
  const std::vector<double> times{0.0, 1.0};
  const auto f = pushforward_solve(*sign_field(), g, interval(-1, 1, 0.5), times, particles(40000));
  EXPECT_NEAR(f.mass, 1.0, 1e-12);
  const auto& s = f.at(1.0);
  double hist_mass = 0.0, leaked = 0.0;
  for (std::size_t i = 0; i < s.nodes(); ++i) {
    const double x = s.grid().coord(0, i), ax = std::abs(x);
    hist_mass += s(i) * s.grid().cell_volume();
    EXPECT_GE(s(i), 0.0);
    // Particles starting where the regularized field is still turning around lag behind.
    if (ax < 1.0 - 3 * h) leaked += s(i) * s.grid().cell_volume();
    if (ax > 2.0 + 3 * h) EXPECT_EQ(s(i), 0.0) << x;
    if (ax > 1.0 + 3 * h && ax < 2.0 - 3 * h) EXPECT_NEAR(s(i), 0.5, 0.05) << x;
  }
  EXPECT_NEAR(hist_mass, 1.0, 1e-9);
  EXPECT_LE(leaked, 3 * h);
}

TEST(Pushforward, ZeroFieldIsStationary) {
  const Grid g = Grid::line(-1, 1, 101);
  const std::vector<double> times{0.0, 0.5, 1.0};
  const auto f = pushforward_solve(*constant_field({0.0}), g, interval(-0.5, 0.3), times, particles(5000));
  for (double t : times) {
    EXPECT_EQ(f.at(t).values().size(), f.at(0.0).values().size());
    for (std::size_t i = 0; i < f.at(t).nodes(); ++i) EXPECT_EQ(f.at(t)(i), f.at(0.0)(i));
  }
}

TEST(Pushforward, SmoothedDensityKeepsMass) {
  const Grid g = Grid::line(-4, 4, 401);
  const auto f = pushforward_solve(*sign_field(), g, interval(-1, 1, 0.5), std::vector<double>{0.5}, particles(20000));
  double m = 0.0;
  for (double v : f.smoothed.front().values()) m += v * f.smoothed.front().grid().cell_volume();
  EXPECT_NEAR(m, 1.0, 1e-3);
}

TEST(Pushforward, SignedDataTracksBothParts) {
  const Grid g = Grid::line(-3, 3, 301);
  const auto f = pushforward_signed(*sign_field(), g, interval(0.1, 1), interval(-1, -0.1), std::vector<double>{1.0},
                                    particles(10000));
  EXPECT_NEAR(f.mass, 0.0, 1e-12);
  for (std::size_t i = 0; i < f.slices[0].nodes(); ++i) {
    const double x = f.slices[0].grid().coord(0, i);
    if (x > 0.1) EXPECT_GE(f.slices[0](i), 0.0);
    if (x < -0.1) EXPECT_LE(f.slices[0](i), 0.0);
  }
}

TEST(Pushforward, RejectsNegativeDensity) {
  const Grid g = Grid::line(-1, 1, 11);
  EXPECT_THROW(sample_particles(g, [](std::span<const double>) { return -1.0; }, 10, 0), DomainError);
  EXPECT_THROW(sample_particles(g, [](std::span<const double>) { return 0.0; }, 10, 0), DomainError);
}

TEST(Pushforward, DeterministicAcrossWorkerCounts) {
  const Grid g = Grid::box({-1, -1}, {1, 1}, {41, 41});
  const auto f0 = [](std::span<const double> x) { return x[0] * x[0] + x[1] + 1.0; };
  set_worker_count(1);
  const auto a = pushforward_solve(*quadrant_field(), g, f0, std::vector<double>{0.5}, particles(3000));
  set_worker_count(4);
  const auto b = pushforward_solve(*quadrant_field(), g, f0, std::vector<double>{0.5}, particles(3000));
  set_worker_count(0);
  EXPECT_EQ(a.ensembles[0].positions, b.ensembles[0].positions);
  EXPECT_EQ(a.slices[0].values().size(), b.slices[0].values().size());
  for (std::size_t i = 0; i < a.slices[0].nodes(); ++i) EXPECT_EQ(a.slices[0](i), b.slices[0](i));
}

TEST(Duality, SignFieldClosedForm) {
  const Grid g = Grid::line(-3, 3, 601);
  const double h = g.spacing(0);
  const std::size_t n = 20000;
  const auto f0 = interval(-1, 1, 0.5);
  const auto f = pushforward_solve(*sign_field(), g, f0, std::vector<double>{0.0, 1.0}, particles(n));
  const auto r = duality_check(f, sign_field(), f0, g, interval(1, 2), 1.0);
  EXPECT_NEAR(r.pushed, 0.5, 3.0 * (1.0 / std::sqrt(double(n)) + h));
  EXPECT_NEAR(r.pulled, 0.5, 3.0 * h);
  EXPECT_LE(r.residual, 3.0 * (1.0 / std::sqrt(double(n)) + h));
}

TEST(Duality, ZeroObservable) {
  const Grid g = Grid::line(-2, 2, 201);
  const auto f0 = interval(-1, 1);
  const auto f = pushforward_solve(*sign_field(), g, f0, std::vector<double>{0.5}, particles(1000));
  const auto r = duality_check(f, sign_field(), f0, g, [](std::span<const double>) { return 0.0; }, 0.5);
  EXPECT_EQ(r.residual, 0.0);
}

TEST(Duality, TranslationWithBump) {
  const Grid g = Grid::line(-3, 3, 601);
  const double h = g.spacing(0);
  const std::size_t n = 20000;
  const auto f0 = [](std::span<const double> x) { return std::exp(-x[0] * x[0]); };
  const auto ubar = [](std::span<const double> x) { return std::max(0.0, 1.0 - std::abs(x[0] + 0.5)); };
  const auto f = pushforward_solve(*constant_field({-1.0}), g, f0, std::vector<double>{0.7}, particles(n));
  const auto r = duality_check(f, constant_field({-1.0}), f0, g, ubar, 0.7);
  EXPECT_LE(r.residual, 1.0 / std::sqrt(double(n)) + h);
}

TEST(Jacobian, SignFieldVacuum) {
  const Grid g = Grid::line(-2, 2, 201);
  const double h = g.spacing(0);
  const auto J = jacobian(*sign_field(), g, std::vector<double>{0.0, 1.0}, particles(100000));
  for (std::size_t i = 0; i < J.slices[0].nodes(); ++i) {
    const double x = J.slices[0].grid().coord(0, i);
    if (std::abs(x) < 2.0 - 2 * h) EXPECT_NEAR(J.slices[0](i), 1.0, 0.05) << x;
  }
  double leaked = 0.0;
  for (std::size_t i = 0; i < J.slices[1].nodes(); ++i) {
    const double x = J.slices[1].grid().coord(0, i), ax = std::abs(x);
    if (ax < 1.0 - 3 * h) leaked += J.slices[1](i) * J.slices[1].grid().cell_volume();
    if (ax > 1.0 + 3 * h && ax < 2.0 - 2 * h) EXPECT_NEAR(J.slices[1](i), 1.0, 0.05) << x;
  }
  EXPECT_LE(leaked, 3 * h);
}

TEST(Jacobian, ZeroFieldIsOne) {
  const Grid g = Grid::line(-1, 1, 101);
  const auto J = jacobian(*constant_field({0.0}), g, std::vector<double>{1.0}, particles(50000));
  for (std::size_t i = 1; i + 1 < J.slices[0].nodes(); ++i) EXPECT_NEAR(J.slices[0](i), 1.0, 0.05);
}

TEST(Jacobian, LinearDecayConcentrates) {
  const Grid g = Grid::line(-1, 1, 101);
  const auto J = jacobian(*linear_field(1, {-1.0}, {0.0}), g, std::vector<double>{1.0}, particles(20000));
  for (std::size_t i = 1; i + 1 < J.slices[0].nodes(); ++i) EXPECT_NEAR(J.slices[0](i), std::exp(1.0), 0.1);
}

TEST(Jacobian, DominatesData) {
  const Grid g = Grid::line(-2, 2, 201);
  const auto f0 = [](std::span<const double> x) { return std::sin(3.0 * x[0]); };
  const std::vector<double> times{0.5, 1.0};
  EXPECT_LE(domination_excess(*sign_field(), g, f0, times, particles(5000)), 1e-9);
  EXPECT_LE(domination_excess(*linear_field(1, {-1.0}, {0.0}), g, f0, times, particles(5000)), 1e-9);
}

TEST(Overlap, OneDimensionalFieldsAreInjective) {
  const Grid g = Grid::line(-2, 2, 401);
  for (auto b : {sign_field(), linear_field(1, {-1.0}, {0.0}), constant_field({0.7})}) {
    const auto r = renormalization_overlap(*b, g, interval(-1, -0.05), interval(0.05, 1), 0.0, 1.0, particles(5000));
    EXPECT_LE(r.overlap, 1e-2) << b->id();
    EXPECT_GT(r.mass_plus, 0.9);
  }
}

TEST(Overlap, DiagonalOppositeQuadrants) {
  const Grid g = Grid::box({-1, -1}, {1, 1}, {81, 81});
  PushforwardOptions o = particles(20000);
  o.field_grid = g;  // piecewise constant outside the box
  const auto r = renormalization_overlap(
      *quadrant_field(), g, [](std::span<const double> x) { return x[0] < 0 && x[1] < 0 ? 1.0 : 0.0; },
      [](std::span<const double> x) { return x[0] > 0 && x[1] > 0 ? 1.0 : 0.0; }, 0.0, 0.5, o);
  EXPECT_LE(r.overlap, 1e-2);
}

TEST(Overlap, OrderedCubes) {
  const Grid g = Grid::box({-1, -1}, {1, 1}, {81, 81});
  PushforwardOptions o = particles(20000);
  o.field_grid = g;
  auto cube = [](double a0, double a1, double b0, double b1) {
    return [=](std::span<const double> x) { return x[0] >= a0 && x[0] <= a1 && x[1] >= b0 && x[1] <= b1 ? 1.0 : 0.0; };
  };
  const auto r = renormalization_overlap(*quadrant_field(), g, cube(-0.6, -0.1, -0.3, 0.2), cube(0.0, 0.5, 0.3, 0.8),
                                         0.0, 0.5, o);
  EXPECT_LE(r.overlap, 1e-2);
}

TEST(DensityBound, LpBoundHolds) {
  const Grid g = Grid::line(-3, 3, 601);
  const auto f0 = interval(-1, 1, 0.5);
  const auto f = pushforward_solve(*linear_field(1, {-1.0}, {0.0}), g, f0, std::vector<double>{0.5, 1.0},
                                   particles(10000));
  for (double t : {0.5, 1.0})
    for (double p : {1.0, 2.0}) {
      const auto r = density_lp_bound(f, *linear_field(1, {-1.0}, {0.0}), f0, g, 1.0, t, p);
      EXPECT_LE(r.lhs, r.rhs * 1.02) << t << " " << p;
    }
}
