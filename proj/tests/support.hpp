#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hydronet/diff/tape.hpp"
#include "hydronet/graph.hpp"

namespace testing_support {

using hydronet::EdgeRecord;
using hydronet::NodeKind;
using hydronet::NodeRecord;
using hydronet::WaterNetwork;
using hydronet::diff::Tensor;

// Random connected network: a random spanning tree plus `extra` chords. The
// last node is a reservoir when `with_reservoir` is set.
inline WaterNetwork random_network(std::mt19937_64& rng, std::size_t n, std::size_t extra, bool with_reservoir = true) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<NodeRecord> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    NodeRecord r{"N" + std::to_string(i), std::round(100.0 * (5.0 + 10.0 * u(rng))) / 100.0, NodeKind::Junction, 0.0};
    nodes.push_back(r);
  }
  if (with_reservoir) {
    nodes.back().kind = NodeKind::FixedHead;
    nodes.back().elevation = 60.0;
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    pairs.emplace_back(pick(rng), i);
  }
  std::uniform_int_distribution<std::size_t> any(0, n - 1);
  for (std::size_t k = 0, tries = 0; k < extra && tries < 100 * (extra + 1); ++tries) {
    auto a = any(rng), b = any(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (std::find(pairs.begin(), pairs.end(), std::make_pair(a, b)) != pairs.end()) continue;
    pairs.emplace_back(a, b);
    ++k;
  }
  static constexpr double diams[] = {0.1, 0.15, 0.2, 0.3};
  std::vector<EdgeRecord> edges;
  for (const auto& [a, b] : pairs) {
    EdgeRecord e;
    e.id = "P" + std::to_string(edges.size());
    e.from = nodes[a].id;
    e.to = nodes[b].id;
    e.length = std::round(100.0 + 400.0 * u(rng));
    e.diameter = diams[std::min<std::size_t>(3, static_cast<std::size_t>(4.0 * u(rng)))];
    e.roughness = std::round(100.0 + 40.0 * u(rng));
    edges.push_back(e);
  }
  return WaterNetwork::build(nodes, edges);
}

inline WaterNetwork path_network(std::size_t n) {
  std::vector<NodeRecord> nodes;
  std::vector<EdgeRecord> edges;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back({"V" + std::to_string(i), 0.0, NodeKind::Junction, 0.0});
  for (std::size_t i = 0; i + 1 < n; ++i)
    edges.push_back({"E" + std::to_string(i), nodes[i].id, nodes[i + 1].id, 100.0 + 10.0 * static_cast<double>(i), 0.2, 120.0, false, 0.0});
  return WaterNetwork::build(nodes, edges);
}

inline Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}

}  // namespace testing_support
