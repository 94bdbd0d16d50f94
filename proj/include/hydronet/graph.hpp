#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hydronet/error.hpp"

namespace hydronet {

enum class NodeKind { Junction, FixedHead };

struct NodeRecord {
  std::string id;
  double elevation = 0.0;  // m
  NodeKind kind = NodeKind::Junction;
  // Water level above elevation for fixed-head nodes (0 for reservoirs, the
  // initial level for tanks). Ignored for junctions.
  double level = 0.0;

  bool is_fixed_head() const { return kind == NodeKind::FixedHead; }
  double fixed_head() const { return elevation + level; }

  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct EdgeRecord {
  std::string id;
  std::string from;  // canonical endpoint order, as stored
  std::string to;
  double length = 0.0;     // m
  double diameter = 0.0;   // m
  double roughness = 0.0;  // Hazen-Williams C
  bool is_prv = false;
  double prv_setting = 0.0;  // downstream pressure head cap (m), PRVs only

  friend bool operator==(const EdgeRecord&, const EdgeRecord&) = default;
};

struct Neighbor {
  std::size_t node;
  std::size_t edge;
};

/// Immutable undirected water network. Each pipe is stored once; the
/// adjacency lists carry both directions.
class WaterNetwork {
 public:
  struct Edge {
    std::size_t from;
    std::size_t to;
  };

  static WaterNetwork build(std::vector<NodeRecord> nodes, std::vector<EdgeRecord> edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<NodeRecord>& nodes() const { return nodes_; }
  const std::vector<EdgeRecord>& edges() const { return edges_; }
  const NodeRecord& node(std::size_t i) const { return nodes_.at(i); }
  const EdgeRecord& edge(std::size_t i) const { return edges_.at(i); }
  Edge endpoints(std::size_t e) const { return endpoints_.at(e); }
  const std::vector<Neighbor>& neighbors(std::size_t v) const { return adjacency_.at(v); }
  std::size_t degree(std::size_t v) const { return adjacency_.at(v).size(); }

  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(ErrorCode::UnknownNodeRef, "unknown node '" + id + "'");
    return it->second;
  }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  std::vector<std::size_t> junctions() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!nodes_[i].is_fixed_head()) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> fixed_heads() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].is_fixed_head()) out.push_back(i);
    return out;
  }

  /// Shortest hop counts from `source` to every node (unit edge weights).
  std::vector<std::size_t> hop_distances(std::size_t source) const {
    constexpr auto unreached = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> dist(nodes_.size(), unreached);
    std::queue<std::size_t> frontier;
    dist.at(source) = 0;
    frontier.push(source);
    while (!frontier.empty()) {
      auto v = frontier.front();
      frontier.pop();
      for (const auto& nb : adjacency_[v]) {
        if (dist[nb.node] == unreached) {
          dist[nb.node] = dist[v] + 1;
          frontier.push(nb.node);
        }
      }
    }
    return dist;
  }

  friend bool operator==(const WaterNetwork& a, const WaterNetwork& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<NodeRecord> nodes_;
  std::vector<EdgeRecord> edges_;
  std::vector<Edge> endpoints_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline WaterNetwork WaterNetwork::build(std::vector<NodeRecord> nodes, std::vector<EdgeRecord> edges) {
  WaterNetwork net;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!net.index_.emplace(nodes[i].id, i).second)
      throw Error(ErrorCode::DuplicateId, "node '" + nodes[i].id + "'");
  }
  std::unordered_set<std::string> edge_ids;
  net.adjacency_.resize(nodes.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& rec = edges[e];
    if (!edge_ids.insert(rec.id).second) throw Error(ErrorCode::DuplicateId, "edge '" + rec.id + "'");
    auto from = net.index_.find(rec.from);
    if (from == net.index_.end()) throw Error(ErrorCode::DanglingEndpoint, rec.from);
    auto to = net.index_.find(rec.to);
    if (to == net.index_.end()) throw Error(ErrorCode::DanglingEndpoint, rec.to);
    if (from->second == to->second) throw Error(ErrorCode::SelfLoop, "edge '" + rec.id + "'");
    net.endpoints_.push_back({from->second, to->second});
    net.adjacency_[from->second].push_back({to->second, e});
    net.adjacency_[to->second].push_back({from->second, e});
  }
  net.nodes_ = std::move(nodes);
  net.edges_ = std::move(edges);

  if (net.nodes_.empty()) throw Error(ErrorCode::DisconnectedGraph, "network has no nodes");
  auto dist = net.hop_distances(0);
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] == std::numeric_limits<std::size_t>::max())
      throw Error(ErrorCode::DisconnectedGraph, "node '" + net.nodes_[i].id + "' unreachable from '" +
                                                    net.nodes_[0].id + "'");
  }
  // A single isolated node is connected but has degree 0.
  if (net.nodes_.size() == 1) throw Error(ErrorCode::DisconnectedGraph, "node '" + net.nodes_[0].id + "' has no pipes");
  return net;
}

inline WaterNetwork build_network(std::vector<NodeRecord> nodes, std::vector<EdgeRecord> edges) {
  return WaterNetwork::build(std::move(nodes), std::move(edges));
}

struct GraphStats {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  std::size_t hop_diameter = 0;
  std::size_t degree_min = 0;
  double degree_mean = 0.0;
  std::size_t degree_max = 0;
};

inline GraphStats network_stats(const WaterNetwork& net) {
  GraphStats s;
  s.num_nodes = net.node_count();
  s.num_edges = net.edge_count();
  s.degree_min = std::numeric_limits<std::size_t>::max();
  std::size_t degree_sum = 0;
  for (std::size_t v = 0; v < net.node_count(); ++v) {
    auto d = net.degree(v);
    s.degree_min = std::min(s.degree_min, d);
    s.degree_max = std::max(s.degree_max, d);
    degree_sum += d;
    auto dist = net.hop_distances(v);
    s.hop_diameter = std::max(s.hop_diameter, *std::max_element(dist.begin(), dist.end()));
  }
  s.degree_mean = static_cast<double>(degree_sum) / static_cast<double>(net.node_count());
  return s;
}

}  // namespace hydronet
