#include <gtest/gtest.h>

#include <cmath>

#include "ordflow/error.hpp"
#include "ordflow/flow.hpp"
#include "ordflow/monotone.hpp"

using namespace ordflow;

namespace {

FieldPtr decay() { return linear_field(1, {-1.0}, {0.0}); }

}  // namespace

TEST(RegularizedFlow, LinearDecayClosedForm) {
  const Grid g = Grid::line(-1, 1, 201);
  const std::vector<double> times{0.5, 1.0};
  for (FlowSide side : {FlowSide::upper, FlowSide::lower}) {
    FlowMap f = integrate_regularized_flow(*decay(), side, 0.02, 0.0, times, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_NEAR(f.at(1.0)(i), g.coord(0, i) * std::exp(-1.0), 1e-9);
      EXPECT_NEAR(f.at(0.5)(i), g.coord(0, i) * std::exp(-0.5), 1e-9);
    }
    EXPECT_TRUE(is_increasing(f.at(1.0)));
  }
}

TEST(RegularizedFlow, ConstantTranslation) {
  const Grid g = Grid::box({-1, -1}, {1, 1}, {11, 11});
  FlowMap f = integrate_regularized_flow(*constant_field({0.5, -0.25}), FlowSide::upper, 0.4, 0.2,
                                         std::vector<double>{1.2}, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(f.at(1.2)(i, 0), g.node(i)[0] + 0.5, 1e-12);
    EXPECT_NEAR(f.at(1.2)(i, 1), g.node(i)[1] - 0.25, 1e-12);
  }
}

TEST(RegularizedFlow, SignFieldExtremeSelections) {
  const Grid g = Grid::line(-2, 2, 401);
  const std::size_t zero = g.nearest(0, 0.0);
  const double h = g.spacing(0);
  FlowMap up = integrate_regularized_flow(*sign_field(), FlowSide::upper, 2 * h, 0.0, std::vector<double>{1.0}, g);
  FlowMap lo = integrate_regularized_flow(*sign_field(), FlowSide::lower, 2 * h, 0.0, std::vector<double>{1.0}, g);
  EXPECT_NEAR(up.at(1.0)(zero), 1.0, h);
  EXPECT_NEAR(lo.at(1.0)(zero), -1.0, h);
  EXPECT_TRUE(check_comparison(lo, up).ordered);
}

TEST(RegularizedFlow, Guards) {
  const Grid g = Grid::line(-1, 1, 101);
  FlowOptions o;
  o.dt = 0.05;
  EXPECT_THROW(integrate_regularized_flow(*sign_field(), FlowSide::upper, 0.04, 0, std::vector<double>{1.0}, g, o),
               GuardError);
  auto liar = analytic_field(
      1, "liar", [](double, std::span<const double> x, std::span<double> out) { out[0] = 5 * x[0] + 3; },
      TimeProfile(1.0), TimeProfile(0.0));
  EXPECT_THROW(integrate_regularized_flow(*liar, FlowSide::upper, 0.04, 0, std::vector<double>{1.0}, g),
               GuardError);
  auto compressive = analytic_field(
      1, "minus-sign", [](double, std::span<const double> x, std::span<double> out) { out[0] = x[0] > 0 ? -1 : 1; },
      TimeProfile(1.0), TimeProfile(0.0));
  EXPECT_THROW(integrate_regularized_flow(*compressive, FlowSide::upper, 0.04, 0, std::vector<double>{1.0}, g),
               GuardError);
}

TEST(MaximalMinimal, SignFieldGapAndAgreement) {
  const Grid g = Grid::line(-2, 2, 801);
  const double h = g.spacing(0);
  const std::vector<double> times{0.25, 0.5, 1.0};
  const auto sched = default_eps_schedule(0.08, 2 * h);
  MaxMinFlow mm = maximal_minimal_flow(*sign_field(), 0.0, times, g, sched);
  const std::size_t zero = g.nearest(0, 0.0);
  for (double t : times) {
    const auto& up = mm.maximal.at(t);
    const auto& lo = mm.minimal.at(t);
    EXPECT_NEAR(up(zero) - lo(zero), 2 * t, 2 * h) << "t=" << t;
    EXPECT_TRUE(is_increasing(up));
    EXPECT_TRUE(is_increasing(lo));
    std::size_t disagree = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_GE(up(i), lo(i));
      const double x = g.coord(0, i);
      if (std::abs(x) + t > 1.9) continue;
      if (std::abs(up(i) - lo(i)) > 1e-6) {
        ++disagree;
      } else if (x != 0.0) {
        EXPECT_NEAR(up(i), x + (x > 0 ? t : -t), 1e-6);
      }
    }
    EXPECT_LE(disagree, 3U);
  }
}

TEST(MaximalMinimal, LineFieldForwardTranslation) {
  const Grid g = Grid::box({-1, -1}, {1, 1}, {41, 41});
  const double h = g.spacing(0);
  MaxMinFlow mm = maximal_minimal_flow(*line_field(), 0.0, std::vector<double>{0.5}, g,
                                       default_eps_schedule(8 * h, 2 * h));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.node(i);
    if (x[0] < 2 * h || x[0] > 0.4 || x[1] > 0.4) continue;
    EXPECT_NEAR(mm.maximal.at(0.5)(i, 0), x[0] + 0.5, 1e-9);
    EXPECT_NEAR(mm.maximal.at(0.5)(i, 1), x[1] + 0.5, 1e-9);
    EXPECT_NEAR(mm.minimal.at(0.5)(i, 1), x[1] + 0.5, 1e-9);
  }
}

TEST(MaximalMinimal, SmoothFieldHasSmallGap) {
  const Grid g = Grid::line(-1, 1, 201);
  auto smooth = analytic_field(
      1, "tanh", [](double, std::span<const double> x, std::span<double> out) { out[0] = std::tanh(3 * x[0]); },
      TimeProfile(1.0), TimeProfile(0.0));
  const double floor = 2 * g.spacing(0);
  MaxMinFlow mm = maximal_minimal_flow(*smooth, 0.0, std::vector<double>{0.5}, g, default_eps_schedule(0.08, floor));
  double worst = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    worst = std::max(worst, mm.maximal.at(0.5)(i) - mm.minimal.at(0.5)(i));
  EXPECT_LE(worst, floor);
  EXPECT_LE(mm.monotonicity_defect, 1e-6);
}

TEST(Comparison, OrderedStartsAndSides) {
  const Grid g = Grid::box({-1, -1}, {1, 1}, {21, 21});
  const std::vector<double> times{0.25, 0.5};
  FlowMap lo = integrate_regularized_flow(*quadrant_field(), FlowSide::lower, 0.2, 0, times, g);
  FlowMap up = integrate_regularized_flow(*quadrant_field(), FlowSide::upper, 0.2, 0, times, g);
  EXPECT_TRUE(check_comparison(lo, up).ordered);
  EXPECT_TRUE(check_comparison(up, up).ordered);
  EXPECT_EQ(check_comparison(up, up, 0.0).violations, 0U);
  ComparisonReport rev = check_comparison(up, lo);
  EXPECT_FALSE(rev.ordered);
  EXPECT_GT(rev.worst, 0.0);
  // Ordered starts: neighbouring nodes along each axis stay ordered at every time.
  for (const auto& s : up.slices) EXPECT_TRUE(is_increasing(s));
}

TEST(Semigroup, CatalogResiduals) {
  const Grid g = Grid::line(-2, 2, 401);
  const double h = g.spacing(0);
  const Box box{{-1.0}, {1.0}};
  struct Case {
    FieldPtr b;
    double tol;
  };
  for (const auto& c : {Case{constant_field({0.3}), 1e-10}, Case{decay(), 1e-6}, Case{sign_field(), 5 * h}}) {
    const auto sched = default_eps_schedule(8 * h, 2 * h);
    MaxMinFlow r = maximal_minimal_flow(*c.b, 0.0, std::vector<double>{0.3, 0.7}, g, sched);
    MaxMinFlow s = maximal_minimal_flow(*c.b, 0.3, std::vector<double>{0.7}, g, sched);
    SemigroupReport rep = semigroup_residual(r.maximal, s.maximal, 0.3, 0.7, &box);
    EXPECT_LE(rep.residual, c.tol) << c.b->id();
    EXPECT_EQ(rep.skipped, 0U);
  }
}

TEST(MeasureBound, Examples) {
  const Grid g = Grid::line(-3, 3, 601);
  const double h = g.spacing(0);
  const auto sched = default_eps_schedule(8 * h, 2 * h);
  MaxMinFlow sg = maximal_minimal_flow(*sign_field(), 0.0, std::vector<double>{1.0}, g, sched);
  MeasureBoundReport vac = measure_bound(sg.maximal, Box{{-0.5}, {0.5}}, 1.0, *sign_field());
  EXPECT_LE(vac.preimage_measure, 2 * h);
  EXPECT_TRUE(vac.holds);

  FlowMap id = integrate_regularized_flow(*constant_field({0.0}), FlowSide::upper, 2 * h, 0.0, std::vector<double>{1.0}, g);
  MeasureBoundReport same = measure_bound(id, Box{{-0.505}, {0.495}}, 1.0, *constant_field({0.0}));
  EXPECT_NEAR(same.preimage_measure, 1.0, 1e-9);

  MaxMinFlow lin = maximal_minimal_flow(*decay(), 0.0, std::vector<double>{1.0}, g, sched);
  MeasureBoundReport e = measure_bound(lin.maximal, Box{{-0.4}, {0.4}}, 1.0, *decay());
  EXPECT_NEAR(e.bound, std::exp(1.0) * 0.8, 1e-12);
  EXPECT_NEAR(e.preimage_measure, e.bound, 2 * h);
  EXPECT_TRUE(e.holds);
}
