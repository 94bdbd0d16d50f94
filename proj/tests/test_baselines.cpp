#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "hydronet/baselines.hpp"
#include "support.hpp"

using namespace hydronet;
using namespace hydronet::baselines;

TEST(MeanImputation, FillsWithSensorMean) {
  auto out = mean_imputation({1.0, 2.0, 3.0, 10.0}, {0, 3});
  EXPECT_EQ(out, (std::vector<double>{1.0, 5.5, 5.5, 10.0}));
  EXPECT_THROW(mean_imputation({1.0}, {}), Error);
  EXPECT_THROW(mean_imputation({1.0}, {4}), Error);
}

TEST(Harmonic, PathRamp) {
  auto net = testing_support::path_network(5);
  auto out = harmonic_interpolation(net, {0.0, 9.0, 9.0, 9.0, 1.0}, {0, 4});
  EXPECT_NEAR(out[1], 0.25, 1e-10);
  EXPECT_NEAR(out[2], 0.5, 1e-10);
  EXPECT_NEAR(out[3], 0.75, 1e-10);
  EXPECT_EQ(out[0], 0.0);
  EXPECT_EQ(out[4], 1.0);
}

TEST(Harmonic, DirectSolveAgreesWithGaussSeidel) {
  std::mt19937_64 rng(3);
  auto net = testing_support::random_network(rng, 30, 10, false);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  std::vector<double> p(30);
  for (auto& v : p) v = u(rng);
  std::vector<std::size_t> sensors{0, 7, 19};
  auto gs = harmonic_interpolation(net, p, sensors);
  HarmonicOptions direct;
  direct.max_sweeps = 0;
  auto lu = harmonic_interpolation(net, p, sensors, direct);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(gs[i], lu[i], 1e-10);
}

TEST(Harmonic, MaximumPrincipleOnRandomGraphs) {
  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> u(10.0, 60.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + trial;
    auto net = testing_support::random_network(rng, n, trial % 9, false);
    std::vector<double> p(n);
    for (auto& v : p) v = u(rng);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::size_t> sensors(idx.begin(), idx.begin() + 1 + trial % 4);
    auto out = harmonic_interpolation(net, p, sensors);
    double lo = 1e9, hi = -1e9;
    for (auto s : sensors) {
      lo = std::min(lo, p[s]);
      hi = std::max(hi, p[s]);
    }
    std::vector<bool> mask(n, false);
    for (auto s : sensors) mask[s] = true;
    EXPECT_LT(harmonic_residual(net, out, mask), 1e-9);
    for (std::size_t v = 0; v < n; ++v) {
      EXPECT_GE(out[v], lo - 1e-9);
      EXPECT_LE(out[v], hi + 1e-9);
    }
  }
}

TEST(Harmonic, SingleSensorIsConstant) {
  auto net = testing_support::path_network(6);
  auto out = harmonic_interpolation(net, {0, 0, 7.5, 0, 0, 0}, {2});
  for (double v : out) EXPECT_NEAR(v, 7.5, 1e-10);
}
