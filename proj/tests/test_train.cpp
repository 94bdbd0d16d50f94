#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "hydronet/hydraulics.hpp"
#include "hydronet/synthetic.hpp"
#include "hydronet/train.hpp"
#include "support.hpp"

using namespace hydronet;
using namespace hydronet::train;

namespace {

WaterNetwork star_with_junctions(std::size_t j) {
  std::vector<NodeRecord> nodes;
  std::vector<EdgeRecord> edges;
  nodes.push_back({"R", 50.0, NodeKind::FixedHead, 0.0});
  for (std::size_t i = 0; i < j; ++i) {
    nodes.push_back({"J" + std::to_string(i), 1.0, NodeKind::Junction, 0.0});
    edges.push_back({"P" + std::to_string(i), "R", nodes.back().id, 100, 0.2, 120, false, 0.0});
  }
  return WaterNetwork::build(nodes, edges);
}

struct SmallProblem {
  WaterNetwork net;
  std::vector<hydraulics::Snapshot> snaps;
};

SmallProblem small_problem(std::size_t days = 1) {
  synthetic::GridOptions opt;
  opt.rows = 3;
  opt.cols = 4;
  auto g = synthetic::grid_network(opt);
  auto dem = hydraulics::generate_demand_patterns(hydraulics::DemandKind::Smooth, days,
                                                  hydraulics::zero_fixed_heads(g.network, g.demands.base_demand), 1);
  return {g.network, hydraulics::simulate(g.network, dem)};
}

mgcn::MGCNConfig tiny_model() {
  mgcn::MGCNConfig c;
  c.layers = 2;
  c.latent_dim = 6;
  return c;
}

}  // namespace

TEST(Sensors, CountRounding) {
  EXPECT_EQ(sensor_count(0.2, 22), 4u);
  EXPECT_EQ(sensor_count(0.05, 22), 1u);
  EXPECT_EQ(sensor_count(0.2, 36), 7u);
  auto net = star_with_junctions(22);
  try {
    sample_sensor_configs(net, 0.01, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RatioTooSmall);
  }
}

TEST(Sensors, DistinctSortedJunctionConfigs) {
  auto net = star_with_junctions(22);
  auto cfgs = sample_sensor_configs(net, 0.2, 30, 7);
  ASSERT_EQ(cfgs.size(), 30u);
  std::set<std::vector<std::size_t>> seen;
  for (const auto& c : cfgs) {
    ASSERT_EQ(c.sensor_nodes.size(), 4u);
    EXPECT_TRUE(std::is_sorted(c.sensor_nodes.begin(), c.sensor_nodes.end()));
    EXPECT_EQ(std::set<std::size_t>(c.sensor_nodes.begin(), c.sensor_nodes.end()).size(), 4u);
    for (auto s : c.sensor_nodes) EXPECT_FALSE(net.node(s).is_fixed_head());
    seen.insert(c.sensor_nodes);
  }
  EXPECT_EQ(seen.size(), 30u);
  EXPECT_EQ(sample_sensor_configs(net, 0.2, 30, 7), cfgs);
  // Only C(3, 3) = 1 subset exists; duplicates are then allowed.
  EXPECT_EQ(sample_sensor_configs(star_with_junctions(3), 1.0, 2, 0).size(), 2u);
}

TEST(Sensors, UniformCoverage) {
  // Every junction is picked with probability k / J.
  auto net = star_with_junctions(10);
  std::vector<double> hits(net.node_count(), 0.0);
  auto cfgs = sample_sensor_configs(net, 0.3, 4000, 3);
  for (const auto& c : cfgs)
    for (auto s : c.sensor_nodes) hits[s] += 1.0;
  for (auto j : net.junctions()) EXPECT_NEAR(hits[j] / 4000.0, 0.3, 0.03);
}

TEST(Normalization, FitRoundTripAndDegenerate) {
  auto p = small_problem();
  auto stats = NormStats::fit(p.net, p.snaps);
  double lo = 1e9, hi = -1e9;
  for (const auto& s : p.snaps)
    for (auto j : p.net.junctions()) {
      lo = std::min(lo, s.pressures[j]);
      hi = std::max(hi, s.pressures[j]);
    }
  EXPECT_EQ(stats.min, lo);
  EXPECT_EQ(stats.max, hi);
  auto v = std::vector<double>{lo, hi, 0.5 * (lo + hi)};
  auto n = normalize(v, stats);
  EXPECT_DOUBLE_EQ(n[0], 0.0);
  EXPECT_DOUBLE_EQ(n[1], 1.0);
  auto back = denormalize(n, stats);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(back[i], v[i], 1e-12);
  EXPECT_THROW(normalize(v, NormStats{2.0, 2.0}), Error);
}

TEST(Inputs, MaskKeepsOnlySensorJunctions) {
  auto p = small_problem();
  auto stats = NormStats::fit(p.net, p.snaps);
  auto sensors = sample_sensor_configs(p.net, 0.25, 1, 2)[0];
  auto x = mask_inputs(p.net, p.snaps[3].pressures, sensors, stats);
  for (std::size_t i = 0; i < p.net.node_count(); ++i) {
    if (sensors.contains(i))
      EXPECT_DOUBLE_EQ(x(i, 0), stats.normalize(p.snaps[3].pressures[i]));
    else
      EXPECT_EQ(x(i, 0), 0.0);
  }
}

TEST(Loss, L1OverJunctionsOnly) {
  diff::Tensor pred(2, 3, std::vector<double>{1, 2, 100, 4, 5, -100});
  diff::Tensor target(2, 3, std::vector<double>{0, 2, 0, 4, 7, 0});
  EXPECT_DOUBLE_EQ(l1_loss(pred, target, {0, 1}), (1 + 0 + 0 + 2) / 4.0);
  EXPECT_THROW(l1_loss(pred, diff::Tensor(3, 2), {0}), Error);
}

TEST(Training, ZeroLearningRateKeepsInitialParameters) {
  auto p = small_problem();
  auto split = hydraulics::split_chronological(p.snaps);
  auto sensors = sample_sensor_configs(p.net, 0.25, 1, 2)[0];
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.epochs = 5;
  cfg.seed = 4;
  auto res = train_model(p.net, split.train, split.val, sensors, tiny_model(), cfg);
  auto init = mgcn::init_params(tiny_model(), 4);
  auto a = mgcn::parameter_list(res.params), b = mgcn::parameter_list(init);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(*a[i] == *b[i]);
}

TEST(Training, DeterministicPerSeed) {
  auto p = small_problem();
  auto split = hydraulics::split_chronological(p.snaps);
  auto sensors = sample_sensor_configs(p.net, 0.25, 1, 2)[0];
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.epochs = 4;
  cfg.batch_size = 7;
  cfg.seed = 11;
  auto r1 = train_model(p.net, split.train, split.val, sensors, tiny_model(), cfg);
  auto r2 = train_model(p.net, split.train, split.val, sensors, tiny_model(), cfg);
  ASSERT_EQ(r1.history.size(), r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    EXPECT_EQ(r1.history[i].train_loss, r2.history[i].train_loss);
    EXPECT_EQ(r1.history[i].val_loss, r2.history[i].val_loss);
  }
  auto a = mgcn::parameter_list(r1.params), b = mgcn::parameter_list(r2.params);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(*a[i] == *b[i]);
  cfg.seed = 12;
  auto r3 = train_model(p.net, split.train, split.val, sensors, tiny_model(), cfg);
  EXPECT_NE(r3.history.back().train_loss, r1.history.back().train_loss);
}

TEST(Training, DefaultConfigLossFallsOnOneSnapshot) {
  auto p = small_problem();
  std::vector<hydraulics::Snapshot> one{p.snaps[10]}, val{p.snaps[50]};
  auto sensors = sample_sensor_configs(p.net, 0.25, 1, 2)[0];
  TrainConfig cfg;
  cfg.epochs = 50;
  // Min-max needs a range, so the training split is a single snapshot of a
  // network whose junction pressures differ.
  auto res = train_model(p.net, one, val, sensors, mgcn::MGCNConfig{}, cfg);
  ASSERT_EQ(res.history.size(), 50u);
  EXPECT_LT(res.history.back().train_loss, res.history.front().train_loss);
}

TEST(Training, EarlyStoppingAfterPatience) {
  auto p = small_problem();
  auto split = hydraulics::split_chronological(p.snaps);
  auto sensors = sample_sensor_configs(p.net, 0.25, 1, 2)[0];
  TrainConfig cfg;
  cfg.lr = 1e-4;
  cfg.epochs = 50;
  cfg.early_stop_patience = 3;
  cfg.early_stop_delta = 1e9;  // nothing after epoch 1 counts as improvement
  auto res = train_model(p.net, split.train, split.val, sensors, tiny_model(), cfg);
  EXPECT_TRUE(res.early_stopped);
  EXPECT_EQ(res.history.size(), 4u);
  EXPECT_EQ(res.best_epoch, 1u);

  cfg.early_stop_delta = 0.0;
  cfg.early_stop_patience = 1000;
  cfg.epochs = 6;
  auto full = train_model(p.net, split.train, split.val, sensors, tiny_model(), cfg);
  EXPECT_FALSE(full.early_stopped);
  EXPECT_EQ(full.history.size(), 6u);
  // Returned parameters are those of the best validation epoch.
  std::size_t best = 0;
  for (std::size_t i = 1; i < full.history.size(); ++i)
    if (full.history[i].val_loss < full.history[best].val_loss) best = i;
  EXPECT_EQ(full.best_epoch, best + 1);
}

TEST(Training, NonFiniteTargetsSurfaceAsNonFiniteLoss) {
  auto p = small_problem();
  auto split = hydraulics::split_chronological(p.snaps);
  auto sensors = sample_sensor_configs(p.net, 0.25, 1, 2)[0];
  std::size_t victim = 0;
  for (auto j : p.net.junctions())
    if (!sensors.contains(j)) victim = j;
  split.train[2].pressures[victim] = std::nan("");
  TrainConfig cfg;
  cfg.epochs = 2;
  try {
    train_model(p.net, split.train, split.val, sensors, tiny_model(), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
    EXPECT_NE(e.detail().find("epoch 1"), std::string::npos);
  }
}

TEST(Metrics, MatchesHandComputedOracle) {
  auto net = star_with_junctions(3);  // node 0 reservoir, 1..3 junctions
  std::vector<hydraulics::Snapshot> snaps(2);
  snaps[0].pressures = {0, 10, 20, 40};
  snaps[1].pressures = {0, 20, 10, 8};
  diff::Tensor pred(2, 4, std::vector<double>{999, 11, 20, 30, -5, 18, 12, 8});
  SensorConfig sensors{{2}, 0.3};
  auto rep = evaluate_predictions(net, snaps, pred, sensors);
  // Errors: s0: 0.1, 0, 0.25; s1: 0.1, 0.2, 0.
  const std::vector<double> all{0.1, 0.0, 0.25, 0.1, 0.2, 0.0};
  double mean = 0;
  for (double e : all) mean += e / 6;
  double var = 0;
  for (double e : all) var += (e - mean) * (e - mean) / 6;
  EXPECT_NEAR(rep.all.mean, mean, 1e-15);
  EXPECT_NEAR(rep.all.std, std::sqrt(var), 1e-12);
  EXPECT_NEAR(rep.sensor.mean, 0.1, 1e-15);
  EXPECT_NEAR(rep.sensor.std, 0.1, 1e-12);
  EXPECT_NEAR(rep.non_sensor.mean, 0.45 / 4, 1e-15);
  EXPECT_EQ(rep.n_snapshots, 2u);
  EXPECT_EQ(rep.n_nodes, 3u);
  // Group decomposition of the overall mean.
  EXPECT_NEAR(rep.all.mean * 6, rep.sensor.mean * 2 + rep.non_sensor.mean * 4, 1e-14);
  EXPECT_NEAR(rep.per_node_error[0], 0.1, 1e-15);
  EXPECT_NEAR(rep.per_snapshot_error[0], 0.35 / 3, 1e-15);
}

TEST(Metrics, RejectsNonPositiveTruth) {
  auto net = star_with_junctions(2);
  std::vector<hydraulics::Snapshot> snaps(1);
  snaps[0].pressures = {0, 5, 0.0};
  try {
    evaluate_predictions(net, snaps, diff::Tensor(1, 3), SensorConfig{{1}, 0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveGroundTruth);
  }
}

TEST(Metrics, PerfectPredictionsScoreZero) {
  auto p = small_problem();
  auto sensors = sample_sensor_configs(p.net, 0.25, 1, 2)[0];
  diff::Tensor pred(p.snaps.size(), p.net.node_count());
  for (std::size_t s = 0; s < p.snaps.size(); ++s)
    for (std::size_t i = 0; i < p.net.node_count(); ++i) pred(s, i) = p.snaps[s].pressures[i];
  auto rep = evaluate_predictions(p.net, p.snaps, pred, sensors);
  EXPECT_EQ(rep.all.mean, 0.0);
  EXPECT_EQ(rep.all.std, 0.0);
}
