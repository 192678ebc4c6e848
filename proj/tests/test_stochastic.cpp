#include <gtest/gtest.h>

#include <cmath>

#include "ordflow/error.hpp"
#include "ordflow/monotone.hpp"
#include "ordflow/stochastic.hpp"

using namespace ordflow;

namespace {

double gauss_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

FieldPtr decay() { return linear_field(1, {-1.0}, {0.0}); }

}  // namespace

TEST(EmFlow, DegenerateNoiseMatchesDeterministicFlow) {
  const Grid g = Grid::line(-1, 1, 41);
  std::vector<double> pts;
  for (std::size_t i = 0; i < g.size(); ++i) pts.push_back(g.coord(0, i));
  const std::vector<double> times{0.5, 1.0};
  const double eps = g.spacing(0);
  EmOptions o;
  o.field_grid = Grid::line(-1, 1, 41);
  const auto em = em_flow(*decay(), NoiseSpec::zero(1), FlowSide::upper, eps, 0.0, times, pts, 3, 1, o);
  FlowOptions fo;
  fo.field_grid = o.field_grid;
  const auto fl = integrate_regularized_flow(*decay(), FlowSide::upper, eps, 0.0, times, g, fo);
  for (std::size_t k = 0; k < times.size(); ++k)
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t p = 0; p < 3; ++p) EXPECT_NEAR(em.at(k, i, p)[0], fl.at(times[k])(i), 5e-3);
}

TEST(EmFlow, BrownianStatistics) {
  const double eps = 0.05;
  const std::size_t n = 20000;
  const std::vector<double> pts{0.3}, times{0.2, 1.0};
  const auto pb = em_flow(*constant_field({0.0}), NoiseSpec::additive(1, std::sqrt(2 * eps)), FlowSide::upper, 0.01,
                          0.2, times, pts, n, 11);
  double mean = 0.0, sq = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double x = pb.at(1, 0, p)[0];
    mean += x;
    sq += x * x;
  }
  mean /= n;
  const double var = sq / n - mean * mean, target = 2 * eps * 0.8;
  EXPECT_NEAR(mean, 0.3, 3.0 * std::sqrt(target / n));
  EXPECT_NEAR(var, target, 3.0 * target * std::sqrt(2.0 / n));
  for (std::size_t p = 0; p < n; ++p) EXPECT_EQ(pb.at(0, 0, p)[0], 0.3);
}

TEST(EmFlow, IncrementsAreSharedAcrossStarts) {
  const std::vector<double> pts{-0.5, 0.5}, times{1.0};
  const auto pb = em_flow(*constant_field({0.0}), NoiseSpec::additive(1, 0.3), FlowSide::upper, 0.05, 0.0, times, pts,
                          50, 3);
  for (std::size_t p = 0; p < 50; ++p) EXPECT_NEAR(pb.at(0, 1, p)[0] - pb.at(0, 0, p)[0], 1.0, 1e-12);
}

TEST(Coupling, OrderedStartsStayOrdered) {
  std::vector<double> lo, hi;
  for (int k = 0; k < 10; ++k) {
    lo.push_back(-1.0 + 0.2 * k);
    hi.push_back(-1.0 + 0.2 * k + 0.01 * (k + 1));
  }
  const std::vector<double> times{0.25, 0.5, 1.0};
  const auto noise = NoiseSpec::additive(1, std::sqrt(2 * 0.02));
  EmOptions o;
  o.field_grid = Grid::line(-4, 4, 801);
  const auto a = em_flow(*sign_field(), noise, FlowSide::upper, 0.02, 0.0, times, lo, 1000, 5, o);
  const auto b = em_flow(*sign_field(), noise, FlowSide::upper, 0.02, 0.0, times, hi, 1000, 5, o);
  const auto r = coupled_order_check(a, b);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_EQ(r.checked, 3u * 10u * 1000u);
}

TEST(Coupling, LowerDriftBelowUpperDrift) {
  const std::vector<double> pts{-0.3, 0.0, 0.01, 0.4};
  const std::vector<double> times{0.5, 1.0};
  const auto noise = NoiseSpec::additive(1, 0.2);
  EmOptions o;
  o.field_grid = Grid::line(-4, 4, 801);
  const auto lo = em_flow(*sign_field(), noise, FlowSide::lower, 0.02, 0.0, times, pts, 2000, 9, o);
  const auto hi = em_flow(*sign_field(), noise, FlowSide::upper, 0.02, 0.0, times, pts, 2000, 9, o);
  EXPECT_EQ(coupled_order_check(lo, hi).violations, 0u);
  EXPECT_EQ(coupled_order_check(lo, lo).violations, 0u);
  const auto other = em_flow(*sign_field(), noise, FlowSide::upper, 0.02, 0.0, times, pts, 2000, 10, o);
  EXPECT_THROW(coupled_order_check(lo, other), DomainError);
}

TEST(Coupling, CooperativePlanarField) {
  std::vector<double> lo{-0.5, -0.2, 0.1, 0.0}, hi{-0.4, -0.1, 0.3, 0.2};
  const std::vector<double> times{0.5};
  EmOptions o;
  o.field_grid = Grid::box({-3, -3}, {3, 3}, {121, 121});
  const auto noise = NoiseSpec::additive(2, 0.1);
  const auto a = em_flow(*quadrant_field(), noise, FlowSide::upper, 0.1, 0.0, times, lo, 500, 2, o);
  const auto b = em_flow(*quadrant_field(), noise, FlowSide::upper, 0.1, 0.0, times, hi, 500, 2, o);
  EXPECT_EQ(coupled_order_check(a, b).violations, 0u);
}

TEST(EmFlow, VanishingNoiseApproachesLagrangianFlow) {
  std::vector<double> pts;
  for (int k = -20; k <= 20; ++k) pts.push_back(0.05 * k + 0.013);
  const std::vector<double> times{1.0};
  EmOptions o;
  o.field_grid = Grid::line(-4, 4, 1601);
  std::vector<double> gaps;
  for (double eps : {0.04, 0.02, 0.01}) {
    const auto pb =
        em_flow(*sign_field(), NoiseSpec::additive(1, std::sqrt(2 * eps)), FlowSide::upper, 0.01, 0.0, times, pts, 400, 4, o);
    double gap = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (std::size_t p = 0; p < 400; ++p) {
        const double x = pts[i], exact = x + (x > 0 ? 1.0 : -1.0);
        gap += std::abs(pb.at(0, i, p)[0] - exact);
      }
    gaps.push_back(gap / (pts.size() * 400.0));
  }
  EXPECT_LT(gaps[1], gaps[0]);
  EXPECT_LT(gaps[2], gaps[1]);
}

TEST(EmFlow, Guards) {
  const std::vector<double> pts{0.0}, times{1.0};
  EmOptions o;
  o.oscillation_limit = 0.5;
  o.field_grid = Grid::line(-3, 3, 61);
  EXPECT_THROW(em_flow(*sign_field(), NoiseSpec::zero(1), FlowSide::upper, 0.1, 0.0, times, pts, 1, 0, o), GuardError);
  EmOptions big;
  big.dt = 0.5;
  big.field_grid = o.field_grid;
  EXPECT_THROW(em_flow(*sign_field(), NoiseSpec::zero(1), FlowSide::upper, 0.1, 0.0, times, pts, 1, 0, big), GuardError);
  EXPECT_THROW(em_flow(*sign_field(), NoiseSpec::additive(2, 1.0), FlowSide::upper, 0.1, 0.0, times, pts, 1, 0),
               DimensionError);
  // sgn(0) = 0, so the largest quotient pairs the nodes -h and h.
  EXPECT_NEAR(oscillation_constant(*sign_field(), Grid::line(-1, 1, 21), std::vector<double>{0.0}), 2.0 / 1.2, 1e-12);
}

TEST(SecondOrder, DegenerateNoiseMatchesTransport) {
  const Grid g = Grid::line(-2, 2, 81);
  TransportProblem p;
  p.b = decay();
  p.terminal = [](std::span<const double> x, std::span<double> o) { o[0] = -std::tanh(x[0]); };
  const std::vector<double> times{0.0, 0.5};
  const auto mc = solve_second_order_te(p, NoiseSpec::zero(1), g, times, 2, 1);
  const auto det = solve_transport(p, g, times);
  for (double t : times)
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(mc.solution.at(t)(i), det.at(t)(i), 5e-3);
}

TEST(SecondOrder, HeatKernelSmoothsStep) {
  const Grid g = Grid::line(-1, 1, 41);
  const double eps = 0.05;
  const std::size_t n = 10000;
  TransportProblem p;
  p.b = constant_field({0.0});
  p.terminal = [](std::span<const double> x, std::span<double> o) { o[0] = x[0] <= 0 ? 1.0 : 0.0; };
  const std::vector<double> times{0.0, 0.5};
  EmOptions o;
  o.max_dt = 0.1;
  const auto u = solve_second_order_te(p, NoiseSpec::additive(1, std::sqrt(2 * eps)), g, times, n, 21,
                                       FlowSide::lower, 0.0, o);
  for (double t : times) {
    EXPECT_TRUE(is_decreasing(u.solution.at(t)));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double exact = gauss_cdf(-g.coord(0, i) / std::sqrt(2 * eps * (1.0 - t)));
      const double se = std::sqrt(exact * (1 - exact) / n);
      EXPECT_LE(std::abs(u.solution.at(t)(i) - exact), 3 * se + 1e-12) << t << " " << g.coord(0, i);
    }
  }
}

TEST(SecondOrder, DecreasingDataStaysDecreasing) {
  const Grid g = Grid::line(-2, 2, 41);
  TransportProblem p;
  p.b = sign_field();
  p.terminal = [](std::span<const double> x, std::span<double> o) { o[0] = x[0] <= 0.5 ? 1.0 : 0.0; };
  const std::vector<double> times{0.0, 0.5};
  const auto u = solve_second_order_te(p, NoiseSpec::additive(1, 0.3), g, times, 500, 8);
  for (double t : times) EXPECT_TRUE(is_decreasing(u.solution.at(t)));
}

TEST(FokkerPlanck, DegenerateNoiseMatchesPushforward) {
  const Grid g = Grid::line(-3, 3, 301);
  const auto f0 = [](std::span<const double> x) { return std::abs(x[0]) <= 1 ? 0.5 : 0.0; };
  const std::vector<double> times{1.0};
  const auto fp = solve_fokker_planck(*sign_field(), NoiseSpec::zero(1), g, f0, times, 20000, 3);
  PushforwardOptions po;
  po.particles = 20000;
  po.seed = 3;
  const auto pf = pushforward_solve(*sign_field(), g, f0, times, po);
  EXPECT_LE(lp_distance(fp.slices[0], pf.slices[0]), 0.05);
  EXPECT_NEAR(fp.mass, 1.0, 1e-12);
}

TEST(FokkerPlanck, BrownianSpreading) {
  const Grid g = Grid::line(-6, 6, 601);
  const auto f0 = [](std::span<const double> x) { return std::abs(x[0]) <= 0.05 ? 10.0 : 0.0; };
  const std::vector<double> times{0.25, 1.0};
  const std::size_t n = 20000;
  EmOptions o;
  o.max_dt = 0.05;
  const auto fp = solve_fokker_planck(*constant_field({0.0}), NoiseSpec::additive(1, std::sqrt(2.0)), g, f0, times, n,
                                      17, o);
  const double var0 = 0.1 * 0.1 / 12.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto& e = fp.ensembles[k];
    double m = 0.0, q = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p) {
      m += e.weights[p] * e.position(p)[0];
      q += e.weights[p] * e.position(p)[0] * e.position(p)[0];
    }
    const double var = q / e.mass - (m / e.mass) * (m / e.mass), target = var0 + 2 * times[k];
    EXPECT_NEAR(var, target, 4 * target * std::sqrt(2.0 / n)) << times[k];
  }
}

TEST(FokkerPlanck, DualityWithSecondOrderTransport) {
  const Grid g = Grid::line(-3, 3, 121);
  const auto f0 = [](std::span<const double> x) { return std::abs(x[0]) <= 1 ? 0.5 : 0.0; };
  const auto ubar = [](std::span<const double> x) { return std::exp(-4 * (x[0] - 1) * (x[0] - 1)); };
  const auto noise = NoiseSpec::additive(1, std::sqrt(2 * 0.05));
  const std::size_t n = 20000;
  const auto fp = solve_fokker_planck(*sign_field(), noise, g, f0, std::vector<double>{0.8}, n, 5);
  double pushed = 0.0;
  const auto& e = fp.ensembles[0];
  for (std::size_t p = 0; p < e.size(); ++p) pushed += e.weights[p] * ubar(e.position(p));
  TransportProblem pb;
  pb.b = sign_field();
  pb.T = 0.8;
  pb.terminal = [&](std::span<const double> x, std::span<double> o) { o[0] = ubar(x); };
  const auto u = solve_second_order_te(pb, noise, g, std::vector<double>{0.0}, 4000, 6, FlowSide::upper);
  double pulled = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) pulled += u.solution.slices[0](i) * f0(g.node(i)) * g.spacing(0);
  EXPECT_NEAR(pushed, pulled, 3.0 / std::sqrt(4000.0) + 2 * g.spacing(0));
}
