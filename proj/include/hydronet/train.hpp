#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hydronet/diff/adam.hpp"
#include "hydronet/diff/tape.hpp"
#include "hydronet/hydraulics.hpp"
#include "hydronet/mgcn.hpp"

namespace hydronet::train {

using diff::Tape;
using diff::Tensor;
using diff::Var;
using hydraulics::Snapshot;

struct SensorConfig {
  std::vector<std::size_t> sensor_nodes;  // sorted node indices, junctions only
  double ratio = 0.0;

  bool contains(std::size_t v) const { return std::binary_search(sensor_nodes.begin(), sensor_nodes.end(), v); }
  friend bool operator==(const SensorConfig&, const SensorConfig&) = default;
};

inline std::size_t sensor_count(double ratio, std::size_t junctions) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(junctions)));
}

/// `count` uniform draws without replacement over the junctions. Draws repeat
/// until the configurations are pairwise distinct, unless fewer distinct
/// subsets exist than requested.
inline std::vector<SensorConfig> sample_sensor_configs(const WaterNetwork& net, double ratio, std::size_t count,
                                                       std::uint64_t seed) {
  if (!(ratio > 0.0) || ratio > 1.0) throw Error(ErrorCode::ConfigError, "sensor ratio must be in (0, 1]");
  if (count < 1) throw Error(ErrorCode::ConfigError, "need at least one sensor configuration");
  const auto junctions = net.junctions();
  const std::size_t k = sensor_count(ratio, junctions.size());
  if (k == 0)
    throw Error(ErrorCode::RatioTooSmall, "ratio " + std::to_string(ratio) + " selects no sensor among " +
                                              std::to_string(junctions.size()) + " junctions");

  // C(n, k) capped to avoid overflow; only compared against `count`.
  double subsets = 1.0;
  for (std::size_t i = 0; i < k; ++i)
    subsets *= static_cast<double>(junctions.size() - i) / static_cast<double>(i + 1);
  const bool want_distinct = subsets + 0.5 >= static_cast<double>(count);

  std::mt19937_64 rng(seed);
  std::vector<SensorConfig> out;
  std::set<std::vector<std::size_t>> seen;
  while (out.size() < count) {
    auto pool = junctions;
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(chosen.begin(), chosen.end());
    if (want_distinct && !seen.insert(chosen).second) continue;
    out.push_back({std::move(chosen), ratio});
  }
  return out;
}

/// Min-max scaling of pressure head, fitted on the training split.
struct NormStats {
  double min = 0.0;
  double max = 1.0;

  double normalize(double v) const { return (v - min) / (max - min); }
  double denormalize(double v) const { return v * (max - min) + min; }

  static NormStats fit(const WaterNetwork& net, const std::vector<Snapshot>& snaps) {
    NormStats s{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& snap : snaps)
      for (auto j : net.junctions()) {
        s.min = std::min(s.min, snap.pressures[j]);
        s.max = std::max(s.max, snap.pressures[j]);
      }
    s.check();
    return s;
  }

  void check() const {
    if (!(max > min) || !std::isfinite(min) || !std::isfinite(max))
      throw Error(ErrorCode::DegenerateRange, "pressure range [" + std::to_string(min) + ", " + std::to_string(max) + "]");
  }
};

inline std::vector<double> normalize(const std::vector<double>& values, const NormStats& stats) {
  stats.check();
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = stats.normalize(values[i]);
  return out;
}

inline std::vector<double> denormalize(const std::vector<double>& values, const NormStats& stats) {
  stats.check();
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = stats.denormalize(values[i]);
  return out;
}

/// Model input [N x 1]: normalized pressure at sensor junctions, 0 elsewhere.
inline Tensor mask_inputs(const WaterNetwork& net, const std::vector<double>& pressures, const SensorConfig& sensors,
                          const NormStats& stats) {
  if (pressures.size() != net.node_count())
    throw Error(ErrorCode::ShapeMismatch, std::to_string(pressures.size()) + " pressures for " +
                                              std::to_string(net.node_count()) + " nodes");
  Tensor x(net.node_count(), 1);
  for (auto s : sensors.sensor_nodes) {
    if (s >= net.node_count()) throw Error(ErrorCode::IndexOutOfRange, "sensor " + std::to_string(s));
    if (net.node(s).is_fixed_head()) continue;
    if (!std::isfinite(pressures[s])) throw Error(ErrorCode::NonFiniteValue, "pressure at sensor " + std::to_string(s));
    x(s, 0) = stats.normalize(pressures[s]);
  }
  return x;
}

/// Mean absolute error over the junction columns of [S x N] matrices.
inline double l1_loss(const Tensor& pred, const Tensor& target, const std::vector<std::size_t>& junctions) {
  if (!pred.same_shape(target))
    throw Error(ErrorCode::ShapeMismatch, "l1_loss: " + pred.shape_string() + " vs " + target.shape_string());
  if (pred.rows() == 0 || junctions.empty()) throw Error(ErrorCode::ShapeMismatch, "l1_loss over no entries");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.rows(); ++i)
    for (auto j : junctions) s += std::fabs(pred(i, j) - target(i, j));
  return s / static_cast<double>(pred.rows() * junctions.size());
}

struct TrainConfig {
  double lr = 1e-5;
  double weight_decay = 0.0;
  std::size_t epochs = 2000;
  std::size_t batch_size = 48;
  std::size_t early_stop_patience = 250;
  double early_stop_delta = 1e-6;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr >= 0.0)) throw Error(ErrorCode::ConfigError, "lr must be >= 0");
    if (early_stop_patience < 1) throw Error(ErrorCode::ConfigError, "patience must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::ConfigError, "batch_size must be >= 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  mgcn::MGCNParams params;  // best validation epoch
  NormStats norm;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

/// Batched evaluation of the model over a fixed list of snapshots. Holds the
/// replicated graph and inputs so repeated passes allocate nothing new.
class BatchRunner {
 public:
  BatchRunner(const WaterNetwork& net, const mgcn::MGCNConfig& config, const SensorConfig& sensors,
              const NormStats& norm)
      : net_(net), config_(config), sensors_(sensors), norm_(norm), junctions_(net.junctions()) {}

  struct Batch {
    Tensor x;       // [S*N x 1]
    Tensor target;  // [S*J x 1], normalized
    diff::IndexList junction_rows;
    std::size_t copies = 0;
  };

  Batch make_batch(const std::vector<const Snapshot*>& snaps) const {
    const std::size_t n = net_.node_count(), s = snaps.size();
    Batch b{Tensor(s * n, 1), Tensor(s * junctions_.size(), 1), nullptr, s};
    std::vector<std::size_t> rows;
    rows.reserve(s * junctions_.size());
    for (std::size_t k = 0; k < s; ++k) {
      auto x = mask_inputs(net_, snaps[k]->pressures, sensors_, norm_);
      for (std::size_t i = 0; i < n; ++i) b.x(k * n + i, 0) = x(i, 0);
      for (std::size_t jj = 0; jj < junctions_.size(); ++jj) {
        rows.push_back(k * n + junctions_[jj]);
        b.target(k * junctions_.size() + jj, 0) = norm_.normalize(snaps[k]->pressures[junctions_[jj]]);
      }
    }
    b.junction_rows = diff::make_index(std::move(rows));
    return b;
  }

  /// Records the forward pass and loss of one batch on `tape`.
  Var loss(Tape& tape, const mgcn::BoundParams& bound, const Batch& b) {
    auto pred = forward(tape, bound, b);
    auto junction_pred = diff::gather_rows(pred, b.junction_rows);
    return diff::l1(junction_pred, tape.constant(b.target));
  }

  Var forward(Tape& tape, const mgcn::BoundParams& bound, const Batch& b) {
    const auto& cache = graph_for(b.copies);
    return mgcn::model_forward(cache.graph, tape.constant(b.x), tape.constant(cache.features), bound, config_);
  }

  const std::vector<std::size_t>& junctions() const { return junctions_; }

 private:
  struct GraphCache {
    mgcn::MessageGraph graph;
    Tensor features;
  };

  const GraphCache& graph_for(std::size_t copies) {
    auto it = graphs_.find(copies);
    if (it == graphs_.end())
      it = graphs_.emplace(copies, GraphCache{mgcn::MessageGraph::from_network(net_, copies),
                                              mgcn::edge_features(net_, config_.edge_in_dim, copies)})
               .first;
    return it->second;
  }

  const WaterNetwork& net_;
  mgcn::MGCNConfig config_;
  SensorConfig sensors_;
  NormStats norm_;
  std::vector<std::size_t> junctions_;
  std::map<std::size_t, GraphCache> graphs_;
};

inline std::vector<std::vector<const Snapshot*>> chunk(const std::vector<Snapshot>& snaps,
                                                       const std::vector<std::size_t>& order, std::size_t size) {
  std::vector<std::vector<const Snapshot*>> out;
  for (std::size_t i = 0; i < order.size(); i += size) {
    std::vector<const Snapshot*> b;
    for (std::size_t k = i; k < std::min(order.size(), i + size); ++k) b.push_back(&snaps[order[k]]);
    out.push_back(std::move(b));
  }
  return out;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on the junction L1 loss. Returns the parameters of the
/// epoch with the lowest validation loss. Training stops early once the best
/// validation loss has not improved by more than `early_stop_delta` for
/// `early_stop_patience` consecutive epochs.
inline TrainResult train_model(const WaterNetwork& net, const std::vector<Snapshot>& train_set,
                               const std::vector<Snapshot>& val_set, const SensorConfig& sensors,
                               const mgcn::MGCNConfig& model_config, const TrainConfig& cfg,
                               const EpochCallback& on_epoch = {}) {
  model_config.validate();
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw Error(ErrorCode::ConfigError, "train and validation splits must be non-empty");

  TrainResult result;
  result.norm = NormStats::fit(net, train_set);
  auto params = mgcn::init_params(model_config, cfg.seed);
  result.params = params;
  BatchRunner runner(net, model_config, sensors, result.norm);

  std::vector<std::size_t> val_order(val_set.size());
  for (std::size_t i = 0; i < val_order.size(); ++i) val_order[i] = i;
  std::vector<BatchRunner::Batch> val_batches;
  for (const auto& b : chunk(val_set, val_order, cfg.batch_size)) val_batches.push_back(runner.make_batch(b));

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  diff::AdamState adam;
  diff::AdamOptions opt;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  auto param_ptrs = mgcn::parameter_list(params);

  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_sum = 0.0;
    std::size_t train_count = 0;
    try {
      for (const auto& snaps : chunk(train_set, order, cfg.batch_size)) {
        auto batch = runner.make_batch(snaps);
        Tape tape;
        auto bound = mgcn::bind(tape, params);
        auto loss = runner.loss(tape, bound, batch);
        tape.backward(loss);
        auto grads = mgcn::gradients(tape, bound);
        diff::adam_step(param_ptrs, grads, adam, opt);
        train_sum += loss.value().item() * static_cast<double>(snaps.size());
        train_count += snaps.size();
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteValue) throw;
      throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": " + e.detail());
    }
    for (auto* p : param_ptrs)
      if (!p->all_finite()) throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": parameters diverged");

    double val_sum = 0.0;
    std::size_t val_count = 0;
    try {
      for (const auto& b : val_batches) {
        Tape tape;
        auto bound = mgcn::bind(tape, params);
        val_sum += runner.loss(tape, bound, b).value().item() * static_cast<double>(b.copies);
        val_count += b.copies;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteValue) throw;
      throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + " (validation): " + e.detail());
    }

    EpochRecord rec{epoch, train_sum / static_cast<double>(train_count), val_sum / static_cast<double>(val_count)};
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
      throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch));
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < best - cfg.early_stop_delta) {
      best = rec.val_loss;
      result.params = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.early_stop_patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

/// Denormalized predictions [S x N] (pressure head, m).
inline Tensor predict_pressures(const WaterNetwork& net, const std::vector<Snapshot>& snaps,
                                const mgcn::MGCNParams& params, const mgcn::MGCNConfig& config,
                                const SensorConfig& sensors, const NormStats& norm, std::size_t batch_size = 48) {
  mgcn::check_params(params, config);
  BatchRunner runner(net, config, sensors, norm);
  const std::size_t n = net.node_count();
  Tensor out(snaps.size(), n);
  std::vector<std::size_t> order(snaps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t row = 0;
  for (const auto& chunk_snaps : chunk(snaps, order, batch_size)) {
    auto batch = runner.make_batch(chunk_snaps);
    Tape tape;
    auto bound = mgcn::bind(tape, params);
    const auto& pred = runner.forward(tape, bound, batch).value();
    for (std::size_t k = 0; k < chunk_snaps.size(); ++k, ++row)
      for (std::size_t i = 0; i < n; ++i) out(row, i) = norm.denormalize(pred(k * n + i, 0));
  }
  return out;
}

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;  // (snapshot, node) pairs
};

struct MetricsReport {
  GroupStats all;
  GroupStats sensor;
  GroupStats non_sensor;
  std::size_t n_snapshots = 0;
  std::size_t n_nodes = 0;             // junctions evaluated
  std::vector<std::size_t> node_index;   // junction node indices, in report order
  std::vector<double> per_node_error;    // mean over snapshots
  std::vector<double> per_snapshot_error;  // mean over junctions
  std::vector<std::size_t> snapshot_timestep;
};

/// Mean relative absolute error |y - y_hat| / y over junctions and snapshots,
/// split into sensor and non-sensor groups. `predictions` is [S x N] in
/// physical units.
inline MetricsReport evaluate_predictions(const WaterNetwork& net, const std::vector<Snapshot>& snaps,
                                          const Tensor& predictions, const SensorConfig& sensors) {
  if (snaps.empty()) throw Error(ErrorCode::ConfigError, "evaluation needs at least one snapshot");
  if (predictions.rows() != snaps.size() || predictions.cols() != net.node_count())
    throw Error(ErrorCode::ShapeMismatch, "predictions " + predictions.shape_string() + " for " +
                                              std::to_string(snaps.size()) + " snapshots of " +
                                              std::to_string(net.node_count()) + " nodes");
  const auto junctions = net.junctions();
  MetricsReport rep;
  rep.n_snapshots = snaps.size();
  rep.n_nodes = junctions.size();
  rep.node_index = junctions;
  rep.per_node_error.assign(junctions.size(), 0.0);
  rep.per_snapshot_error.assign(snaps.size(), 0.0);

  struct Acc {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;
    void add(double v) {
      sum += v;
      sum_sq += v * v;
      ++n;
    }
  } all, sensor, other;
  std::vector<double> errors;
  errors.reserve(snaps.size() * junctions.size());
  for (std::size_t s = 0; s < snaps.size(); ++s) {
    for (std::size_t jj = 0; jj < junctions.size(); ++jj) {
      const auto j = junctions[jj];
      const double y = snaps[s].pressures[j];
      if (!(y > 0.0))
        throw Error(ErrorCode::NonPositiveGroundTruth, "node '" + net.node(j).id + "' timestep " +
                                                           std::to_string(snaps[s].timestep) + " has pressure " +
                                                           std::to_string(y));
      const double err = std::fabs(y - predictions(s, j)) / y;
      all.add(err);
      (sensors.contains(j) ? sensor : other).add(err);
      rep.per_node_error[jj] += err;
      rep.per_snapshot_error[s] += err;
    }
    rep.per_snapshot_error[s] /= static_cast<double>(junctions.size());
    rep.snapshot_timestep.push_back(snaps[s].timestep);
  }
  for (auto& e : rep.per_node_error) e /= static_cast<double>(snaps.size());

  auto finish = [](const Acc& a) {
    GroupStats g;
    g.count = a.n;
    if (a.n == 0) return g;
    g.mean = a.sum / static_cast<double>(a.n);
    g.std = std::sqrt(std::max(0.0, a.sum_sq / static_cast<double>(a.n) - g.mean * g.mean));
    return g;
  };
  rep.all = finish(all);
  rep.sensor = finish(sensor);
  rep.non_sensor = finish(other);
  return rep;
}

inline MetricsReport evaluate(const mgcn::MGCNParams& params, const mgcn::MGCNConfig& config, const NormStats& norm,
                              const WaterNetwork& net, const std::vector<Snapshot>& snaps,
                              const SensorConfig& sensors) {
  if (snaps.empty()) throw Error(ErrorCode::ConfigError, "evaluation needs at least one snapshot");
  return evaluate_predictions(net, snaps, predict_pressures(net, snaps, params, config, sensors, norm), sensors);
}

}  // namespace hydronet::train
