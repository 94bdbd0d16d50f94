#pragma once

// Spatial message-passing network over a water network graph.
//
// Per layer, every directed edge u -> v first refreshes its embedding with the
// absolute difference of its endpoint embeddings, then emits the message
// msg_proj(selu(h_u | h_e)). Messages are sum-aggregated at v, added to h_v
// (residual) and passed through the layer MLP. A multi-hop layer repeats the
// edge refresh / message / aggregate / residual step P times, reusing the
// layer's message projection, before the single MLP update.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hydronet/diff/tape.hpp"
#include "hydronet/graph.hpp"

namespace hydronet::mgcn {

using diff::IndexList;
using diff::Tape;
using diff::Tensor;
using diff::Var;

struct MGCNConfig {
  std::size_t layers = 5;
  std::size_t hops = 1;
  std::size_t latent_dim = 32;
  std::size_t mlp_layers = 2;
  std::size_t node_in_dim = 1;  // masked pressure
  std::size_t edge_in_dim = 2;  // length, diameter [, PRV mask]

  void validate() const {
    if (layers < 1 || hops < 1 || latent_dim < 1 || mlp_layers < 1 || node_in_dim < 1 || edge_in_dim < 1)
      throw Error(ErrorCode::ConfigError, "model dimensions must all be >= 1");
    if (edge_in_dim > 3) throw Error(ErrorCode::ConfigError, "edge_in_dim must be 1, 2 or 3");
  }

  /// Number of scalar parameters. Independent of `hops`: every hop of a layer
  /// shares that layer's message projection.
  std::size_t parameter_count() const {
    const std::size_t d = latent_dim;
    const std::size_t embed = (node_in_dim + 1) * d + (edge_in_dim + 1) * d;
    const std::size_t per_layer = (2 * d + 1) * d + mlp_layers * (d + 1) * d;
    return embed + layers * per_layer + (d + 1);
  }

  friend bool operator==(const MGCNConfig&, const MGCNConfig&) = default;
};

template <class T>
struct LinearT {
  T weight;  // [in x out]
  T bias;    // [1 x out]
};

template <class T>
struct LayerParamsT {
  LinearT<T> msg_proj;  // 2d -> d
  std::vector<LinearT<T>> mlp;
};

template <class T>
struct ParamsT {
  LinearT<T> alpha;  // node embedding
  LinearT<T> beta;   // edge embedding
  std::vector<LayerParamsT<T>> layers;
  LinearT<T> gamma;  // readout
};

using MGCNParams = ParamsT<Tensor>;
using BoundParams = ParamsT<Var>;

/// Visits every parameter as (name, value&) in checkpoint order.
template <class P, class Fn>
void for_each_param(P& params, Fn&& fn) {
  auto visit = [&](const std::string& prefix, auto& lin) {
    fn(prefix + ".w", lin.weight);
    fn(prefix + ".b", lin.bias);
  };
  visit("alpha", params.alpha);
  visit("beta", params.beta);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const std::string base = "layer" + std::to_string(l);
    visit(base + ".msg_proj", params.layers[l].msg_proj);
    for (std::size_t k = 0; k < params.layers[l].mlp.size(); ++k)
      visit(base + ".mlp" + std::to_string(k), params.layers[l].mlp[k]);
  }
  visit("gamma", params.gamma);
}

inline std::size_t count_parameters(const MGCNParams& params) {
  std::size_t n = 0;
  for_each_param(params, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

/// Zero biases; weights uniform in +-sqrt(1/fan_in).
inline MGCNParams init_params(const MGCNConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  auto make = [&](std::size_t in, std::size_t out) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    LinearT<Tensor> lin{Tensor(in, out), Tensor(1, out)};
    for (auto& w : lin.weight.values()) w = dist(rng);
    return lin;
  };
  const std::size_t d = config.latent_dim;
  MGCNParams p;
  p.alpha = make(config.node_in_dim, d);
  p.beta = make(config.edge_in_dim, d);
  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerParamsT<Tensor> layer;
    layer.msg_proj = make(2 * d, d);
    for (std::size_t k = 0; k < config.mlp_layers; ++k) layer.mlp.push_back(make(d, d));
    p.layers.push_back(std::move(layer));
  }
  p.gamma = make(d, 1);
  return p;
}

/// Same structure as `config` with every value set to zero.
inline MGCNParams zero_params(const MGCNConfig& config) {
  auto p = init_params(config, 0);
  for_each_param(p, [](const std::string&, Tensor& t) {
    for (auto& v : t.values()) v = 0.0;
  });
  return p;
}

inline void check_params(const MGCNParams& params, const MGCNConfig& config) {
  auto expected = zero_params(config);
  std::vector<std::pair<std::string, std::string>> want;
  for_each_param(expected, [&](const std::string& n, const Tensor& t) { want.emplace_back(n, t.shape_string()); });
  std::size_t i = 0;
  for_each_param(params, [&](const std::string& n, const Tensor& t) {
    if (i >= want.size() || want[i].first != n || want[i].second != t.shape_string())
      throw Error(ErrorCode::ShapeMismatch, "parameter '" + n + "' " + t.shape_string() + " does not match config");
    ++i;
  });
  if (i != want.size()) throw Error(ErrorCode::ShapeMismatch, "parameter set does not match config");
}

inline BoundParams bind(Tape& tape, const MGCNParams& params) {
  auto lin = [&](const LinearT<Tensor>& l) { return LinearT<Var>{tape.leaf(l.weight), tape.leaf(l.bias)}; };
  BoundParams b;
  b.alpha = lin(params.alpha);
  b.beta = lin(params.beta);
  for (const auto& layer : params.layers) {
    LayerParamsT<Var> bl;
    bl.msg_proj = lin(layer.msg_proj);
    for (const auto& m : layer.mlp) bl.mlp.push_back(lin(m));
    b.layers.push_back(std::move(bl));
  }
  b.gamma = lin(params.gamma);
  return b;
}

/// Gradients of the last backward pass, in for_each_param order.
inline std::vector<Tensor> gradients(const Tape& tape, BoundParams& bound) {
  std::vector<Tensor> out;
  for_each_param(bound, [&](const std::string&, Var v) { out.push_back(tape.grad(v)); });
  return out;
}

inline std::vector<Tensor*> parameter_list(MGCNParams& params) {
  std::vector<Tensor*> out;
  for_each_param(params, [&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

/// Directed-edge view of a network: pipe e yields edge 2e (from -> to) and
/// edge 2e+1 (to -> from). `copies` > 1 stacks disjoint replicas, which is how
/// a mini-batch of snapshots is evaluated in one pass.
struct MessageGraph {
  std::size_t num_nodes = 0;
  IndexList sources;
  IndexList targets;

  std::size_t num_directed_edges() const { return sources->size(); }

  static MessageGraph from_network(const WaterNetwork& net, std::size_t copies = 1) {
    std::vector<std::size_t> src, dst;
    const std::size_t n = net.node_count();
    src.reserve(2 * net.edge_count() * copies);
    dst.reserve(2 * net.edge_count() * copies);
    for (std::size_t c = 0; c < copies; ++c) {
      const std::size_t off = c * n;
      for (std::size_t e = 0; e < net.edge_count(); ++e) {
        auto ends = net.endpoints(e);
        src.push_back(off + ends.from);
        dst.push_back(off + ends.to);
        src.push_back(off + ends.to);
        dst.push_back(off + ends.from);
      }
    }
    return {n * copies, diff::make_index(std::move(src)), diff::make_index(std::move(dst))};
  }
};

/// Edge input features per directed edge: length and diameter scaled by their
/// network-wide maxima, then the PRV mask when `edge_in_dim` is 3. Both
/// directions of a pipe carry identical rows.
inline Tensor edge_features(const WaterNetwork& net, std::size_t edge_in_dim, std::size_t copies = 1) {
  if (edge_in_dim < 1 || edge_in_dim > 3) throw Error(ErrorCode::ConfigError, "edge_in_dim must be 1, 2 or 3");
  double max_len = 0.0, max_diam = 0.0;
  for (const auto& e : net.edges()) {
    max_len = std::max(max_len, e.length);
    max_diam = std::max(max_diam, e.diameter);
  }
  const std::size_t m = net.edge_count();
  Tensor f(2 * m * copies, edge_in_dim);
  for (std::size_t c = 0; c < copies; ++c) {
    for (std::size_t e = 0; e < m; ++e) {
      const auto& rec = net.edge(e);
      double row[3] = {max_len > 0 ? rec.length / max_len : 0.0, max_diam > 0 ? rec.diameter / max_diam : 0.0,
                       rec.is_prv ? 1.0 : 0.0};
      for (std::size_t dir = 0; dir < 2; ++dir)
        for (std::size_t k = 0; k < edge_in_dim; ++k) f(c * 2 * m + 2 * e + dir, k) = row[k];
    }
  }
  return f;
}

struct LayerState {
  Var node_h;  // [N x d]
  Var edge_h;  // [M_dir x d]
};

inline Var apply(const LinearT<Var>& lin, Var x) { return diff::linear(x, lin.weight, lin.bias); }

inline LayerState embed(Var x, Var f, const BoundParams& params) {
  if (x.cols() != params.alpha.weight.rows() || f.cols() != params.beta.weight.rows())
    throw Error(ErrorCode::ShapeMismatch, "embed: inputs " + x.value().shape_string() + ", " +
                                              f.value().shape_string() + " do not match the embedding layers");
  return {apply(params.alpha, x), apply(params.beta, f)};
}

/// h_e + |h_u - h_v| for every directed edge u -> v.
inline Var edge_update(const LayerState& state, const MessageGraph& graph) {
  if (state.node_h.cols() != state.edge_h.cols())
    throw Error(ErrorCode::ShapeMismatch, "edge_update: node and edge embeddings differ in width");
  auto h_u = diff::gather_rows(state.node_h, graph.sources);
  auto h_v = diff::gather_rows(state.node_h, graph.targets);
  return diff::add(state.edge_h, diff::abs_elem(diff::sub(h_u, h_v)));
}

/// Sum over incoming edges of msg_proj(selu(h_u | h_e)); `state.edge_h` must
/// already hold the refreshed edge embeddings.
inline Var message_and_aggregate(const LayerState& state, const MessageGraph& graph, const LinearT<Var>& msg_proj) {
  auto h_u = diff::gather_rows(state.node_h, graph.sources);
  auto msg = apply(msg_proj, diff::selu(diff::concat_cols(h_u, state.edge_h)));
  return diff::scatter_sum(msg, graph.targets, graph.num_nodes);
}

inline Var mlp_forward(Var x, const std::vector<LinearT<Var>>& mlp) {
  for (std::size_t k = 0; k < mlp.size(); ++k) {
    x = apply(mlp[k], x);
    if (k + 1 < mlp.size()) x = diff::selu(x);
  }
  return x;
}

inline LayerState layer_forward(LayerState state, const MessageGraph& graph, const LayerParamsT<Var>& layer) {
  state.edge_h = edge_update(state, graph);
  auto m = message_and_aggregate(state, graph, layer.msg_proj);
  state.node_h = mlp_forward(diff::add(state.node_h, m), layer.mlp);
  return state;
}

inline LayerState multihop_layer_forward(LayerState state, const MessageGraph& graph,
                                         const LayerParamsT<Var>& layer, std::size_t hops) {
  if (hops < 1) throw Error(ErrorCode::ConfigError, "hops must be >= 1");
  for (std::size_t p = 1; p < hops; ++p) {
    state.edge_h = edge_update(state, graph);
    auto m = message_and_aggregate(state, graph, layer.msg_proj);
    state.node_h = diff::add(state.node_h, m);
  }
  return layer_forward(state, graph, layer);
}

/// Predictions [N x 1] for node inputs x [N x D] and edge inputs f [M_dir x K].
inline Var model_forward(const MessageGraph& graph, Var x, Var f, const BoundParams& params,
                         const MGCNConfig& config) {
  if (x.rows() != graph.num_nodes || f.rows() != graph.num_directed_edges())
    throw Error(ErrorCode::ShapeMismatch, "model_forward: x " + x.value().shape_string() + ", f " +
                                              f.value().shape_string() + " for a graph of " +
                                              std::to_string(graph.num_nodes) + " nodes and " +
                                              std::to_string(graph.num_directed_edges()) + " directed edges");
  if (x.cols() != config.node_in_dim || f.cols() != config.edge_in_dim || params.layers.size() != config.layers)
    throw Error(ErrorCode::ShapeMismatch, "model_forward: inputs or parameters disagree with config");
  auto state = embed(x, f, params);
  for (const auto& layer : params.layers) state = multihop_layer_forward(state, graph, layer, config.hops);
  return apply(params.gamma, state.node_h);
}

/// Tape-backed forward pass returning plain values.
inline Tensor predict(const MessageGraph& graph, const Tensor& x, const Tensor& f, const MGCNParams& params,
                      const MGCNConfig& config) {
  Tape tape;
  auto bound = bind(tape, params);
  return model_forward(graph, tape.constant(x), tape.constant(f), bound, config).value();
}

inline Tensor predict(const WaterNetwork& net, const Tensor& x, const MGCNParams& params, const MGCNConfig& config) {
  return predict(MessageGraph::from_network(net), x, edge_features(net, config.edge_in_dim), params, config);
}

}  // namespace hydronet::mgcn
