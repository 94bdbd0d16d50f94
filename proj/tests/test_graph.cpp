#include <gtest/gtest.h>

#include <random>

#include "hydronet/graph.hpp"
#include "support.hpp"

using namespace hydronet;
using testing_support::random_network;

namespace {

std::vector<NodeRecord> three_nodes() {
  return {{"A", 1.0, NodeKind::Junction, 0.0}, {"B", 2.0, NodeKind::Junction, 0.0}, {"R", 50.0, NodeKind::FixedHead, 0.0}};
}

EdgeRecord pipe(std::string id, std::string a, std::string b) { return {id, a, b, 100.0, 0.2, 120.0, false, 0.0}; }

ErrorCode build_error(std::vector<NodeRecord> nodes, std::vector<EdgeRecord> edges) {
  try {
    WaterNetwork::build(nodes, edges);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "build succeeded";
  return ErrorCode::IoError;
}

// All-pairs hop distances by Floyd-Warshall over the edge list.
std::vector<std::vector<double>> floyd(const WaterNetwork& net) {
  const auto n = net.node_count();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 1e18));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (std::size_t e = 0; e < net.edge_count(); ++e) {
    auto [a, b] = net.endpoints(e);
    d[a][b] = d[b][a] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

}  // namespace

TEST(Graph, BuildsAdjacencyBothWays) {
  auto net = WaterNetwork::build(three_nodes(), {pipe("P1", "A", "B"), pipe("P2", "B", "R")});
  EXPECT_EQ(net.node_count(), 3u);
  EXPECT_EQ(net.degree(net.index_of("B")), 2u);
  EXPECT_EQ(net.neighbors(0).at(0).node, 1u);
  EXPECT_EQ(net.neighbors(1).at(0).node, 0u);
  EXPECT_EQ(net.junctions(), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(net.fixed_heads(), (std::vector<std::size_t>{2}));
}

TEST(Graph, RejectsMalformedInput) {
  auto nodes = three_nodes();
  auto dup_nodes = nodes;
  dup_nodes[1].id = "A";
  EXPECT_EQ(build_error(dup_nodes, {pipe("P1", "A", "R")}), ErrorCode::DuplicateId);
  EXPECT_EQ(build_error(nodes, {pipe("P1", "A", "B"), pipe("P1", "B", "R")}), ErrorCode::DuplicateId);
  EXPECT_EQ(build_error(nodes, {pipe("P1", "A", "Z"), pipe("P2", "B", "R")}), ErrorCode::DanglingEndpoint);
  EXPECT_EQ(build_error(nodes, {pipe("P1", "A", "A"), pipe("P2", "B", "R")}), ErrorCode::SelfLoop);
  EXPECT_EQ(build_error(nodes, {pipe("P1", "A", "B")}), ErrorCode::DisconnectedGraph);
  EXPECT_EQ(build_error({nodes[0]}, {}), ErrorCode::DisconnectedGraph);
  EXPECT_EQ(build_error({}, {}), ErrorCode::DisconnectedGraph);
}

TEST(Graph, UnknownIdLookup) {
  auto net = WaterNetwork::build(three_nodes(), {pipe("P1", "A", "B"), pipe("P2", "B", "R")});
  EXPECT_THROW(net.index_of("nope"), Error);
  EXPECT_FALSE(net.contains("nope"));
}

TEST(Graph, HopDistancesMatchFloydWarshall) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto net = random_network(rng, 5 + trial, trial % 7);
    auto d = floyd(net);
    std::size_t diam = 0;
    for (std::size_t s = 0; s < net.node_count(); ++s) {
      auto bfs = net.hop_distances(s);
      for (std::size_t t = 0; t < net.node_count(); ++t) {
        ASSERT_EQ(static_cast<double>(bfs[t]), d[s][t]);
        diam = std::max<std::size_t>(diam, bfs[t]);
      }
    }
    EXPECT_EQ(network_stats(net).hop_diameter, diam);
  }
}

TEST(Graph, StatsOnPath) {
  auto s = network_stats(testing_support::path_network(5));
  EXPECT_EQ(s.num_nodes, 5u);
  EXPECT_EQ(s.num_edges, 4u);
  EXPECT_EQ(s.hop_diameter, 4u);
  EXPECT_EQ(s.degree_min, 1u);
  EXPECT_EQ(s.degree_max, 2u);
  EXPECT_DOUBLE_EQ(s.degree_mean, 8.0 / 5.0);
}

TEST(Graph, StatsInvariantUnderNodeRelabelling) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto net = random_network(rng, 12, 5);
    auto nodes = net.nodes();
    std::shuffle(nodes.begin(), nodes.end(), rng);
    auto edges = net.edges();
    std::shuffle(edges.begin(), edges.end(), rng);
    auto shuffled = WaterNetwork::build(nodes, edges);
    auto a = network_stats(net), b = network_stats(shuffled);
    EXPECT_EQ(a.hop_diameter, b.hop_diameter);
    EXPECT_EQ(a.degree_min, b.degree_min);
    EXPECT_EQ(a.degree_max, b.degree_max);
    EXPECT_DOUBLE_EQ(a.degree_mean, b.degree_mean);
  }
}

TEST(Graph, HandshakeLemma) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto net = random_network(rng, 4 + trial, trial);
    std::size_t sum = 0;
    for (std::size_t v = 0; v < net.node_count(); ++v) sum += net.degree(v);
    EXPECT_EQ(sum, 2 * net.edge_count());
  }
}
