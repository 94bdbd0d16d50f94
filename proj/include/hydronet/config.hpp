#pragma once

// Flat key=value run configuration, one pair per line, `#` starts a comment.
// Unknown and repeated keys are rejected. Relative paths resolve against the
// directory of the config file.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "hydronet/hydraulics.hpp"
#include "hydronet/mgcn.hpp"
#include "hydronet/train.hpp"

namespace hydronet::config {

struct RunConfig {
  std::filesystem::path network_path;
  std::filesystem::path output_dir = "out";

  std::size_t days = 2;
  std::size_t eval_days = 1;
  hydraulics::DemandKind demand_kind = hydraulics::DemandKind::Smooth;
  hydraulics::DemandKind eval_demand_kind = hydraulics::DemandKind::Noisy;
  std::uint64_t scenario_seed = 1;

  double sensor_ratio = 0.2;
  std::size_t sensor_num_configs = 1;
  std::size_t sensor_config_index = 0;
  std::uint64_t sensor_seed = 3;

  mgcn::MGCNConfig model;
  train::TrainConfig train;

  std::string evaluate_split = "test";  // test | eval
};

inline std::string kind_name(hydraulics::DemandKind k) { return k == hydraulics::DemandKind::Smooth ? "smooth" : "noisy"; }

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T number(const std::string& key, const std::string& v, std::size_t line) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw Error(ErrorCode::ConfigError, key + ": '" + v + "' is not a valid number", line);
  return out;
}

inline std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline RunConfig parse(std::istream& in, const std::filesystem::path& base_dir = {}) {
  RunConfig c;
  std::map<std::string, std::size_t> seen;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    raw = detail::trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "expected key = value", line);
    const std::string key = detail::trim(raw.substr(0, eq));
    const std::string val = detail::trim(raw.substr(eq + 1));
    if (key.empty() || val.empty()) throw Error(ErrorCode::ConfigError, "empty key or value", line);
    if (!seen.emplace(key, line).second) throw Error(ErrorCode::ConfigError, "duplicate key " + key, line);

    auto size = [&] { return detail::number<std::size_t>(key, val, line); };
    auto u64 = [&] { return detail::number<std::uint64_t>(key, val, line); };
    auto real = [&] { return detail::number<double>(key, val, line); };
    auto path = [&] {
      std::filesystem::path p(val);
      return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    auto kind = [&] {
      if (val == "smooth") return hydraulics::DemandKind::Smooth;
      if (val == "noisy") return hydraulics::DemandKind::Noisy;
      throw Error(ErrorCode::ConfigError, key + " must be smooth or noisy", line);
    };

    if (key == "network_path") c.network_path = path();
    else if (key == "output_dir") c.output_dir = path();
    else if (key == "scenario.days") c.days = size();
    else if (key == "scenario.eval_days") c.eval_days = size();
    else if (key == "scenario.demand_kind") c.demand_kind = kind();
    else if (key == "scenario.eval_demand_kind") c.eval_demand_kind = kind();
    else if (key == "scenario.seed") c.scenario_seed = u64();
    else if (key == "sensor.ratio") c.sensor_ratio = real();
    else if (key == "sensor.num_configs") c.sensor_num_configs = size();
    else if (key == "sensor.config_index") c.sensor_config_index = size();
    else if (key == "sensor.seed") c.sensor_seed = u64();
    else if (key == "model.layers") c.model.layers = size();
    else if (key == "model.hops") c.model.hops = size();
    else if (key == "model.latent_dim") c.model.latent_dim = size();
    else if (key == "model.mlp_layers") c.model.mlp_layers = size();
    else if (key == "model.edge_features") c.model.edge_in_dim = size();
    else if (key == "train.lr") c.train.lr = real();
    else if (key == "train.weight_decay") c.train.weight_decay = real();
    else if (key == "train.epochs") c.train.epochs = size();
    else if (key == "train.batch_size") c.train.batch_size = size();
    else if (key == "train.patience") c.train.early_stop_patience = size();
    else if (key == "train.delta") c.train.early_stop_delta = real();
    else if (key == "train.seed") c.train.seed = u64();
    else if (key == "evaluate.split") {
      if (val != "test" && val != "eval") throw Error(ErrorCode::ConfigError, "evaluate.split must be test or eval", line);
      c.evaluate_split = val;
    } else {
      throw Error(ErrorCode::ConfigError, "unknown key " + key, line);
    }
  }

  if (c.network_path.empty()) throw Error(ErrorCode::ConfigError, "network_path is required");
  if (c.days < 1) throw Error(ErrorCode::ConfigError, "scenario.days must be >= 1");
  if (c.sensor_num_configs < 1) throw Error(ErrorCode::ConfigError, "sensor.num_configs must be >= 1");
  if (c.sensor_config_index >= c.sensor_num_configs)
    throw Error(ErrorCode::ConfigError, "sensor.config_index must be < sensor.num_configs");
  if (!(c.sensor_ratio > 0.0) || c.sensor_ratio > 1.0) throw Error(ErrorCode::ConfigError, "sensor.ratio must be in (0, 1]");
  c.model.validate();
  c.train.validate();
  if (!(c.train.lr > 0.0)) throw Error(ErrorCode::ConfigError, "train.lr must be > 0");
  return c;
}

inline RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
  return parse(in, path.parent_path());
}

/// Every key with its effective value, in a fixed order.
inline std::string resolved(const RunConfig& c) {
  std::ostringstream o;
  o << "network_path = " << c.network_path.string() << '\n'
    << "output_dir = " << c.output_dir.string() << '\n'
    << "scenario.days = " << c.days << '\n'
    << "scenario.eval_days = " << c.eval_days << '\n'
    << "scenario.demand_kind = " << kind_name(c.demand_kind) << '\n'
    << "scenario.eval_demand_kind = " << kind_name(c.eval_demand_kind) << '\n'
    << "scenario.seed = " << c.scenario_seed << '\n'
    << "sensor.ratio = " << detail::fmt(c.sensor_ratio) << '\n'
    << "sensor.num_configs = " << c.sensor_num_configs << '\n'
    << "sensor.config_index = " << c.sensor_config_index << '\n'
    << "sensor.seed = " << c.sensor_seed << '\n'
    << "model.layers = " << c.model.layers << '\n'
    << "model.hops = " << c.model.hops << '\n'
    << "model.latent_dim = " << c.model.latent_dim << '\n'
    << "model.mlp_layers = " << c.model.mlp_layers << '\n'
    << "model.edge_features = " << c.model.edge_in_dim << '\n'
    << "train.lr = " << detail::fmt(c.train.lr) << '\n'
    << "train.weight_decay = " << detail::fmt(c.train.weight_decay) << '\n'
    << "train.epochs = " << c.train.epochs << '\n'
    << "train.batch_size = " << c.train.batch_size << '\n'
    << "train.patience = " << c.train.early_stop_patience << '\n'
    << "train.delta = " << detail::fmt(c.train.early_stop_delta) << '\n'
    << "train.seed = " << c.train.seed << '\n'
    << "evaluate.split = " << c.evaluate_split << '\n';
  return o.str();
}

}  // namespace hydronet::config
