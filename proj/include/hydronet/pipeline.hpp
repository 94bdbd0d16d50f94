#pragma once

// The five command-line operations as library calls. Each reads the run
// configuration, does its work and writes its artifacts under output_dir.
// Failures surface as hydronet::Error; the executable maps them to exit codes.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hydronet/baselines.hpp"
#include "hydronet/checkpoint.hpp"
#include "hydronet/config.hpp"
#include "hydronet/graph.hpp"
#include "hydronet/hydraulics.hpp"
#include "hydronet/inp_io.hpp"
#include "hydronet/snapshot_csv.hpp"
#include "hydronet/train.hpp"

namespace hydronet::pipeline {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

inline inp::ParsedInp load_network(const config::RunConfig& cfg) { return inp::parse_inp(read_text(cfg.network_path)); }

inline fs::path split_path(const config::RunConfig& cfg, const std::string& split) {
  return cfg.output_dir / (split + ".csv");
}

inline std::vector<hydraulics::Snapshot> load_split(const config::RunConfig& cfg, const WaterNetwork& net,
                                                    const std::string& split) {
  return csv::align_to_network(csv::read_snapshots_csv(split_path(cfg, split)), net);
}

inline train::SensorConfig sensors_for(const config::RunConfig& cfg, const WaterNetwork& net) {
  return train::sample_sensor_configs(net, cfg.sensor_ratio, cfg.sensor_num_configs, cfg.sensor_seed)
      .at(cfg.sensor_config_index);
}

inline Json metrics_json(const train::MetricsReport& rep) {
  auto group = [](const train::GroupStats& g) { return Json{{"mean", g.mean}, {"std", g.std}}; };
  return Json{{"all", group(rep.all)},
              {"sensor", group(rep.sensor)},
              {"non_sensor", group(rep.non_sensor)},
              {"n_snapshots", rep.n_snapshots},
              {"n_nodes", rep.n_nodes}};
}

inline Json stats_json(const GraphStats& s) {
  return Json{{"num_nodes", s.num_nodes},     {"num_edges", s.num_edges},     {"hop_diameter", s.hop_diameter},
              {"degree_min", s.degree_min},   {"degree_mean", s.degree_mean}, {"degree_max", s.degree_max}};
}

inline void write_error_tables(const fs::path& dir, const std::string& tag, const WaterNetwork& net,
                               const train::MetricsReport& rep) {
  std::ostringstream nodes, snaps;
  nodes << "node_id,mean_relative_error\n";
  for (std::size_t k = 0; k < rep.node_index.size(); ++k)
    nodes << net.node(rep.node_index[k]).id << ',' << csv::to_text(rep.per_node_error[k]) << '\n';
  snaps << "timestep,mean_relative_error\n";
  for (std::size_t k = 0; k < rep.per_snapshot_error.size(); ++k)
    snaps << rep.snapshot_timestep[k] << ',' << csv::to_text(rep.per_snapshot_error[k]) << '\n';
  write_text(dir / ("per_node_errors_" + tag + ".csv"), nodes.str());
  write_text(dir / ("per_snapshot_errors_" + tag + ".csv"), snaps.str());
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream o;
  o << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return o.str();
}

/// Simulates `days` of training demand plus `eval_days` of evaluation demand
/// (seeded scenario.seed + 1, timesteps continuing after the training days)
/// and writes train/val/test[/eval].csv and manifest.json.
inline void generate(const config::RunConfig& cfg) {
  auto parsed = load_network(cfg);
  const auto& net = parsed.network;
  const auto base = hydraulics::zero_fixed_heads(net, parsed.demands.base_demand);
  ensure_dir(cfg.output_dir);

  auto demands = hydraulics::generate_demand_patterns(cfg.demand_kind, cfg.days, base, cfg.scenario_seed);
  auto split = hydraulics::split_chronological(hydraulics::simulate(net, demands));
  std::vector<hydraulics::Snapshot> eval;
  if (cfg.eval_days > 0) {
    auto eval_demands = hydraulics::generate_demand_patterns(cfg.eval_demand_kind, cfg.eval_days, base,
                                                             cfg.scenario_seed + 1);
    eval = hydraulics::simulate(net, eval_demands, {}, cfg.days * hydraulics::kStepsPerDay);
  }

  csv::write_snapshots_csv(split_path(cfg, "train"), net, split.train);
  csv::write_snapshots_csv(split_path(cfg, "val"), net, split.val);
  csv::write_snapshots_csv(split_path(cfg, "test"), net, split.test);
  if (!eval.empty()) csv::write_snapshots_csv(split_path(cfg, "eval"), net, eval);

  double worst_balance = 0.0;
  for (const auto* part : {&split.train, &split.val, &split.test, &eval})
    for (const auto& s : *part) worst_balance = std::max(worst_balance, hydraulics::mass_balance_residual(net, s));

  Json manifest{{"created_utc", utc_now()},
                {"network", cfg.network_path.string()},
                {"n_nodes", net.node_count()},
                {"n_junctions", net.junctions().size()},
                {"demand_kind", config::kind_name(cfg.demand_kind)},
                {"scenario_seed", cfg.scenario_seed},
                {"splits", {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}}},
                {"eval", {{"demand_kind", config::kind_name(cfg.eval_demand_kind)}, {"snapshots", eval.size()}}},
                {"max_mass_balance_residual_lps", worst_balance}};
  write_text(cfg.output_dir / "manifest.json", manifest.dump(2) + "\n");
}

inline fs::path default_checkpoint(const config::RunConfig& cfg) { return cfg.output_dir / "checkpoint.txt"; }

inline train::TrainResult train(const config::RunConfig& cfg, const fs::path& checkpoint_path,
                                const train::EpochCallback& on_epoch = {}) {
  auto parsed = load_network(cfg);
  const auto& net = parsed.network;
  auto train_set = load_split(cfg, net, "train");
  auto val_set = load_split(cfg, net, "val");
  auto sensors = sensors_for(cfg, net);
  ensure_dir(cfg.output_dir);

  auto result = train::train_model(net, train_set, val_set, sensors, cfg.model, cfg.train, on_epoch);

  checkpoint::Checkpoint ck{cfg.model, result.norm, {}, result.params};
  for (auto s : sensors.sensor_nodes) ck.sensor_ids.push_back(net.node(s).id);
  if (checkpoint_path.has_parent_path()) ensure_dir(checkpoint_path.parent_path());
  checkpoint::save(checkpoint_path, ck);

  std::ostringstream hist;
  hist << "epoch,train_loss,val_loss\n";
  for (const auto& r : result.history)
    hist << r.epoch << ',' << csv::to_text(r.train_loss) << ',' << csv::to_text(r.val_loss) << '\n';
  write_text(cfg.output_dir / "history.csv", hist.str());
  write_text(cfg.output_dir / "resolved_config.txt", config::resolved(cfg));
  return result;
}

/// Sensor ids stored in a checkpoint mapped back to node indices of `net`.
inline train::SensorConfig checkpoint_sensors(const checkpoint::Checkpoint& ck, const WaterNetwork& net, double ratio) {
  train::SensorConfig s;
  s.ratio = ratio;
  for (const auto& id : ck.sensor_ids) {
    if (!net.contains(id)) throw Error(ErrorCode::SchemaMismatch, "checkpoint sensor '" + id + "' is not in the network");
    const auto v = net.index_of(id);
    if (net.node(v).is_fixed_head()) throw Error(ErrorCode::SchemaMismatch, "checkpoint sensor '" + id + "' is not a junction");
    s.sensor_nodes.push_back(v);
  }
  std::sort(s.sensor_nodes.begin(), s.sensor_nodes.end());
  if (s.sensor_nodes.empty()) throw Error(ErrorCode::SchemaMismatch, "checkpoint lists no sensors");
  return s;
}

inline train::MetricsReport evaluate(const config::RunConfig& cfg, const fs::path& checkpoint_path) {
  auto parsed = load_network(cfg);
  const auto& net = parsed.network;
  auto ck = checkpoint::load(checkpoint_path);
  auto sensors = checkpoint_sensors(ck, net, cfg.sensor_ratio);
  auto snaps = load_split(cfg, net, cfg.evaluate_split);
  auto rep = train::evaluate(ck.params, ck.config, ck.norm, net, snaps, sensors);
  ensure_dir(cfg.output_dir);
  write_text(cfg.output_dir / ("metrics_" + cfg.evaluate_split + ".json"), metrics_json(rep).dump(2) + "\n");
  write_error_tables(cfg.output_dir, cfg.evaluate_split, net, rep);
  return rep;
}

inline train::MetricsReport baseline(const config::RunConfig& cfg, baselines::BaselineKind kind) {
  auto parsed = load_network(cfg);
  const auto& net = parsed.network;
  auto sensors = sensors_for(cfg, net);
  auto snaps = load_split(cfg, net, cfg.evaluate_split);
  diff::Tensor pred(snaps.size(), net.node_count());
  for (std::size_t s = 0; s < snaps.size(); ++s) {
    auto p = baselines::run(kind, net, snaps[s].pressures, sensors.sensor_nodes);
    for (std::size_t i = 0; i < p.size(); ++i) pred(s, i) = p[i];
  }
  auto rep = train::evaluate_predictions(net, snaps, pred, sensors);
  ensure_dir(cfg.output_dir);
  const std::string tag = baselines::to_string(kind) + "_" + cfg.evaluate_split;
  write_text(cfg.output_dir / ("baseline_" + tag + ".json"), metrics_json(rep).dump(2) + "\n");
  return rep;
}

inline GraphStats stats(const config::RunConfig& cfg) { return network_stats(load_network(cfg).network); }

}  // namespace hydronet::pipeline
