#pragma once

// Desk-scale test networks: a jittered planar grid of junctions, thinned to a
// low-degree looped topology and fed by one reservoir at a corner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hydronet/graph.hpp"
#include "hydronet/hydraulics.hpp"
#include "hydronet/inp_io.hpp"

namespace hydronet::synthetic {

struct GridOptions {
  std::size_t rows = 6;
  std::size_t cols = 6;
  double keep_fraction = 0.7;  // of non-tree grid edges
  double min_pressure = 15.0;  // m, at 1.5x base demand
  std::uint64_t seed = 7;
};

struct SyntheticNetwork {
  WaterNetwork network;
  inp::DemandModel demands;
};

namespace detail {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

}  // namespace detail

/// Junctions J0..J{rows*cols-1} first, then reservoir R0 joined to J0.
inline SyntheticNetwork grid_network(const GridOptions& opt) {
  const std::size_t n = opt.rows * opt.cols;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<NodeRecord> nodes;
  std::vector<double> base;
  for (std::size_t r = 0; r < opt.rows; ++r) {
    for (std::size_t c = 0; c < opt.cols; ++c) {
      const double x = static_cast<double>(c) / static_cast<double>(std::max<std::size_t>(1, opt.cols - 1));
      const double y = static_cast<double>(r) / static_cast<double>(std::max<std::size_t>(1, opt.rows - 1));
      const double elev = 10.0 + 12.0 * x + 6.0 * y + 4.0 * std::sin(std::numbers::pi * (x + 2.0 * y)) + 2.0 * unit(rng);
      nodes.push_back({"J" + std::to_string(r * opt.cols + c), std::round(elev * 100.0) / 100.0, NodeKind::Junction, 0.0});
      base.push_back(std::round((0.5 + 1.5 * unit(rng)) * 100.0) / 100.0);
    }
  }

  struct Candidate {
    std::size_t a, b;
  };
  std::vector<Candidate> grid;
  for (std::size_t r = 0; r < opt.rows; ++r)
    for (std::size_t c = 0; c < opt.cols; ++c) {
      const std::size_t i = r * opt.cols + c;
      if (c + 1 < opt.cols) grid.push_back({i, i + 1});
      if (r + 1 < opt.rows) grid.push_back({i, i + opt.cols});
    }
  std::shuffle(grid.begin(), grid.end(), rng);
  detail::UnionFind uf(n);
  std::vector<Candidate> kept, extra;
  for (const auto& e : grid) (uf.unite(e.a, e.b) ? kept : extra).push_back(e);
  const auto n_extra = static_cast<std::size_t>(std::llround(opt.keep_fraction * static_cast<double>(extra.size())));
  kept.insert(kept.end(), extra.begin(), extra.begin() + static_cast<std::ptrdiff_t>(n_extra));
  std::sort(kept.begin(), kept.end(), [](const Candidate& l, const Candidate& r) {
    return l.a != r.a ? l.a < r.a : l.b < r.b;
  });

  static constexpr double kDiameters[] = {0.1, 0.15, 0.2, 0.25, 0.3};
  std::vector<EdgeRecord> edges;
  for (const auto& e : kept) {
    EdgeRecord rec;
    rec.id = "P" + std::to_string(edges.size());
    rec.from = nodes[e.a].id;
    rec.to = nodes[e.b].id;
    rec.length = std::round(200.0 + 600.0 * unit(rng));
    rec.diameter = kDiameters[std::min<std::size_t>(4, static_cast<std::size_t>(5.0 * unit(rng)))];
    rec.roughness = std::round(90.0 + 50.0 * unit(rng));
    edges.push_back(rec);
  }
  EdgeRecord main;
  main.id = "P" + std::to_string(edges.size());
  main.from = "R0";
  main.to = nodes[0].id;
  main.length = 100.0;
  main.diameter = 0.4;
  main.roughness = 130.0;
  edges.push_back(main);

  // Raise the reservoir until every junction keeps min_pressure at peak demand.
  double head = 0.0;
  for (const auto& nd : nodes) head = std::max(head, nd.elevation);
  head = std::ceil(head + opt.min_pressure);
  nodes.push_back({"R0", head, NodeKind::FixedHead, 0.0});
  base.push_back(0.0);

  std::vector<double> peak(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) peak[i] = 1.5 * base[i];
  for (int attempt = 0; attempt < 200; ++attempt) {
    auto net = WaterNetwork::build(nodes, edges);
    auto snap = hydraulics::solve_steady_state(net, peak);
    double lowest = 1e300;
    for (auto j : net.junctions()) lowest = std::min(lowest, snap.pressures[j]);
    if (lowest >= opt.min_pressure) break;
    nodes.back().elevation += std::ceil(opt.min_pressure - lowest);
  }

  inp::DemandModel demands;
  demands.base_demand = base;
  demands.pattern.assign(base.size(), std::nullopt);
  return {WaterNetwork::build(std::move(nodes), std::move(edges)), std::move(demands)};
}

}  // namespace hydronet::synthetic
