#include "conicscan/experiments.hpp"
#include "conicscan/ransac.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace conicscan;

TEST(IterationCount, PrintedValue) { EXPECT_EQ(iteration_count(0.95, 0.3, 4), 369); }

TEST(IterationCount, DirectEvaluation) {
  EXPECT_EQ(iteration_count(0.99, 0.5, 2), 17);
  EXPECT_EQ(iteration_count(0.99, 0.5, 2), static_cast<int>(std::ceil(std::log(0.01) / std::log(0.75))));
}

TEST(IterationCount, Limits) {
  EXPECT_EQ(iteration_count(1e-12, 0.3, 5), 1);
  EXPECT_EQ(iteration_count(0.95, 1.0, 5), 1);
  EXPECT_EQ(iteration_count(0.95, 0.3, 5), 1232);
}

TEST(IterationCount, BadArguments) {
  EXPECT_THROW(iteration_count(0.0, 0.3, 4), std::invalid_argument);
  EXPECT_THROW(iteration_count(1.0, 0.3, 4), std::invalid_argument);
  EXPECT_THROW(iteration_count(0.95, 0.0, 4), std::invalid_argument);
  EXPECT_THROW(iteration_count(0.95, 0.3, 0), std::invalid_argument);
}

TEST(RoundestConic, PassesThroughTheFourPoints) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> t(0, 2 * M_PI);
  int found = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vec2> four;
    for (int i = 0; i < 4; ++i) {
      const double a = t(rng);
      four.emplace_back(10 + 30 * std::cos(a), -5 + 12 * std::sin(a));
    }
    const auto c = roundest_conic_through(four);
    if (!c) continue;
    ++found;
    EXPECT_GT(4 * c->a * c->c - c->b * c->b, 0.0);
    for (const auto& p : four) EXPECT_NEAR((*c)(p.x(), p.y()) / c->gradient(p.x(), p.y()).norm(), 0.0, 1e-9);
  }
  EXPECT_GT(found, 150);
}

TEST(RoundestConic, FourPointsOnACircleGiveTheCircle) {
  const auto pts = oracle::ellipse_points(3, 4, 7, 7, 0, 4, 0.3, 2.0);
  const auto c = roundest_conic_through(pts);
  ASSERT_TRUE(c);
  const auto g = to_geometric(*c);
  ASSERT_TRUE(g);
  EXPECT_NEAR(g->r_major, 7, 1e-8);
  EXPECT_NEAR(g->r_minor, 7, 1e-8);
}

TEST(Ransac, RecoversEllipseAmongClutter) {
  RansacConfig cfg;
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-100, 100);
    std::uniform_real_distribution<double> t(0, 2 * M_PI);
    std::vector<Vec2> pts;
    for (int i = 0; i < 60; ++i) {
      const double a = t(rng);
      pts.emplace_back(40 * std::cos(a), 20 * std::sin(a));
    }
    for (int i = 0; i < 140; ++i) pts.emplace_back(u(rng), u(rng));
    std::shuffle(pts.begin(), pts.end(), rng);
    const auto r = ransac_ellipse(pts, cfg, rng);
    if (r && oracle::relative_error(r->ellipse, 0, 0, 40, 20, 0) < 0.05) ++ok;
  }
  EXPECT_GE(ok, 95);
}

TEST(Ransac, Deterministic) {
  const auto pts = sample_ellipse_2d({.sigma = 1.0, .count = 80, .seed = 3});
  const RansacConfig cfg;
  const auto a = ransac_ellipse(pts, cfg, 9);
  const auto b = ransac_ellipse(pts, cfg, 9);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->inliers, b->inliers);
  EXPECT_EQ(a->ellipse.cx, b->ellipse.cx);
  EXPECT_EQ(a->ellipse.r_minor, b->ellipse.r_minor);
  EXPECT_EQ(a->candidates, b->candidates);
}

TEST(Ransac, TooFewPoints) {
  const std::vector<Vec2> pts{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  EXPECT_FALSE(ransac_ellipse(pts, RansacConfig{}, 1));
}

TEST(Ransac, InliersAreAscendingAndWithinTolerance) {
  const auto pts = sample_ellipse_2d({.sigma = 0.5, .count = 100, .seed = 2});
  RansacConfig cfg;
  cfg.samples = 4;
  const auto r = ransac_ellipse(pts, cfg, 5);
  ASSERT_TRUE(r);
  EXPECT_TRUE(std::is_sorted(r->inliers.begin(), r->inliers.end()));
  EXPECT_EQ(r->iterations, 369);
  EXPECT_GT(r->inliers.size(), 80u);
}

TEST(Ransac, StricterRatioCutsWallFits) {
  RansacOptions o;
  o.trials = 50;
  Profile loose = Profile::paper();
  loose.ransac.ratio_min = 0.2;
  Profile strict = loose;
  strict.ransac.ratio_min = 0.4;
  const auto a = run_ransac_comparison(o, loose);
  const auto b = run_ransac_comparison(o, strict);
  EXPECT_GT(a.ransac_degenerate, 5);
  EXPECT_LT(b.ransac_degenerate, a.ransac_degenerate);
  EXPECT_EQ(a.incremental_degenerate, 0);
}

TEST(RansacConfig, Validation) {
  RansacConfig c;
  EXPECT_NO_THROW(c.validate());
  c.samples = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.inlier_tol = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.confidence = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
