#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hydronet/diff/tensor.hpp"
#include "hydronet/graph.hpp"

namespace hydronet::hydraulics {

using diff::Tensor;

namespace detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace detail

inline constexpr double kFlowExponent = 1.852;
inline constexpr std::size_t kStepsPerDay = 96;  // one sample every 15 minutes
inline constexpr double kLitersPerCubicMeter = 1000.0;

/// Hazen-Williams resistance in SI units: head loss [m] = r * q^1.852 with q in m^3/s.
inline double hazen_williams_resistance(double length_m, double diameter_m, double roughness_c) {
  if (!(length_m > 0.0) || !(diameter_m > 0.0) || !(roughness_c > 0.0))
    throw Error(ErrorCode::NonPositiveInput, "Hazen-Williams inputs must be > 0 (L=" + std::to_string(length_m) +
                                                 ", D=" + std::to_string(diameter_m) +
                                                 ", C=" + std::to_string(roughness_c) + ")");
  return 10.667 * length_m / (std::pow(roughness_c, kFlowExponent) * std::pow(diameter_m, 4.871));
}

struct SolverConfig {
  double tolerance = 1e-8;            // max junction mass-balance residual, L/s
  double head_tolerance = 1e-9;       // max pipe head-loss residual, m
  std::size_t max_iterations = 100;
  double flow_regularization = 1e-6;  // m^3/s, keeps d(head loss)/dq away from 0
  std::size_t max_status_rounds = 10; // PRV open/active re-solves
};

/// One steady state. Indexed like the network's nodes and edges.
struct Snapshot {
  std::size_t timestep = 0;
  std::vector<double> pressures;  // pressure head, m
  std::vector<double> flows;      // L/s, positive from edge.from to edge.to
  std::vector<double> demands;    // L/s
};

/// Largest |inflow - outflow - demand| over junctions, in L/s.
inline double mass_balance_residual(const WaterNetwork& net, const Snapshot& snap) {
  std::vector<double> net_in(net.node_count(), 0.0);
  for (std::size_t e = 0; e < net.edge_count(); ++e) {
    auto ends = net.endpoints(e);
    net_in[ends.to] += snap.flows[e];
    net_in[ends.from] -= snap.flows[e];
  }
  double worst = 0.0;
  for (auto j : net.junctions()) worst = std::max(worst, std::fabs(net_in[j] - snap.demands[j]));
  return worst;
}

/// Newton iteration on nodal heads and pipe flows (global gradient form).
///
/// Each iteration linearizes h(q) = r q|q|^0.852 around the current flows and
/// solves the weighted-Laplacian continuity system for the heads, then updates
/// flows from the linearization; continuity therefore holds after every
/// iteration and convergence is declared on the head-loss residual.
///
/// PRVs start as ordinary pipes. A PRV whose downstream head exceeds its cap
/// (elevation + setting) becomes active: the downstream head is pinned to the
/// cap and the valve flow becomes an unknown. Statuses are re-checked after
/// each converged solve.
inline Snapshot solve_steady_state(const WaterNetwork& net, const std::vector<double>& demands_lps,
                                   const std::vector<std::optional<double>>& fixed_head_override = {},
                                   const SolverConfig& cfg = {}) {
  const std::size_t n = net.node_count();
  const std::size_t m = net.edge_count();
  if (demands_lps.size() != n)
    throw Error(ErrorCode::ShapeMismatch, "demand vector has " + std::to_string(demands_lps.size()) +
                                              " entries for " + std::to_string(n) + " nodes");
  if (cfg.tolerance <= 0.0) throw Error(ErrorCode::ConfigError, "solver tolerance must be > 0");

  std::vector<double> head(n, 0.0);
  std::vector<bool> fixed(n, false);
  double mean_fixed = 0.0;
  std::size_t n_fixed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!net.node(i).is_fixed_head()) continue;
    fixed[i] = true;
    head[i] = net.node(i).fixed_head();
    if (i < fixed_head_override.size() && fixed_head_override[i]) head[i] = *fixed_head_override[i];
    mean_fixed += head[i];
    ++n_fixed;
  }
  if (n_fixed == 0) throw Error(ErrorCode::ConfigError, "network has no fixed-head node");
  mean_fixed /= static_cast<double>(n_fixed);
  // Heads are carried relative to the mean fixed head: small magnitudes keep
  // the rounding in w * (H_a - H_b) well below the mass-balance tolerance.
  const double datum = mean_fixed;
  for (std::size_t i = 0; i < n; ++i) head[i] = fixed[i] ? head[i] - datum : 0.0;

  std::vector<double> demand_m3s(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (!fixed[i]) demand_m3s[i] = demands_lps[i] / kLitersPerCubicMeter;

  std::vector<double> r(m);
  for (std::size_t e = 0; e < m; ++e) {
    const auto& rec = net.edge(e);
    r[e] = hazen_williams_resistance(rec.length, rec.diameter, rec.roughness);
    if (!(r[e] > 0.0) || !std::isfinite(r[e]))
      throw Error(ErrorCode::NonPositiveResistance, "edge '" + rec.id + "'");
  }

  // Initial flows: 1 ft/s through every pipe, as EPANET does.
  std::vector<double> q(m);
  for (std::size_t e = 0; e < m; ++e) {
    const double d = net.edge(e).diameter;
    q[e] = 0.3048 * std::numbers::pi * d * d / 4.0;
  }

  // PRV state: active valves pin head[downstream] and carry an unknown flow.
  std::vector<bool> active(m, false);
  std::vector<std::size_t> downstream(m, 0);
  auto cap_of = [&](std::size_t e) { return net.node(downstream[e]).elevation + net.edge(e).prv_setting - datum; };

  const double eps = cfg.flow_regularization;
  for (std::size_t round = 0; round < cfg.max_status_rounds; ++round) {
    // Unknown numbering: free junction heads, then active PRV flows.
    std::vector<std::ptrdiff_t> head_var(n, -1);
    std::vector<std::ptrdiff_t> prv_var(m, -1);
    std::vector<bool> pinned(n, false);
    std::ptrdiff_t n_unknown = 0;
    for (std::size_t e = 0; e < m; ++e) {
      if (!active[e]) continue;
      if (pinned[downstream[e]])
        throw Error(ErrorCode::SingularSystem, "two active PRVs feed node '" + net.node(downstream[e]).id + "'");
      pinned[downstream[e]] = true;
      head[downstream[e]] = cap_of(e);
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!fixed[i] && !pinned[i]) head_var[i] = n_unknown++;
    for (std::size_t e = 0; e < m; ++e)
      if (active[e]) prv_var[e] = n_unknown++;
    // Equation rows: one per junction.
    std::vector<std::ptrdiff_t> row_of(n, -1);
    std::ptrdiff_t n_rows = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (!fixed[i]) row_of[i] = n_rows++;
    if (n_rows != n_unknown) throw Error(ErrorCode::SingularSystem, "PRV configuration leaves the system non-square");

    bool converged = false;
    double energy_residual = 0.0;
    std::size_t iter = 0;
    for (; iter < cfg.max_iterations; ++iter) {
      std::vector<double> c(m, 0.0), w(m, 0.0);
      for (std::size_t e = 0; e < m; ++e) {
        if (active[e]) continue;
        const double aq = std::fabs(q[e]);
        const double g = kFlowExponent * r[e] * std::pow(aq + eps, kFlowExponent - 1.0);
        const double loss = r[e] * q[e] * std::pow(aq, kFlowExponent - 1.0);
        c[e] = q[e] - loss / g;
        w[e] = 1.0 / g;
      }

      std::vector<Eigen::Triplet<double>> trip;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_rows);
      for (std::size_t i = 0; i < n; ++i)
        if (row_of[i] >= 0) rhs[row_of[i]] = demand_m3s[i];
      // Row j: sum_k s_jk c_k + w_k (H_other - H_j) + sum_p s_jp q_p = d_j
      auto add_term = [&](std::size_t j, std::size_t other, std::size_t e, double s) {
        const auto row = row_of[j];
        if (row < 0) return;
        rhs[row] -= s * c[e];
        if (head_var[j] >= 0)
          trip.emplace_back(row, head_var[j], -w[e]);
        else
          rhs[row] += w[e] * head[j];
        if (head_var[other] >= 0)
          trip.emplace_back(row, head_var[other], w[e]);
        else
          rhs[row] -= w[e] * head[other];
      };
      for (std::size_t e = 0; e < m; ++e) {
        auto ends = net.endpoints(e);
        if (active[e]) {
          const std::size_t up = downstream[e] == ends.to ? ends.from : ends.to;
          if (row_of[downstream[e]] >= 0) trip.emplace_back(row_of[downstream[e]], prv_var[e], 1.0);
          if (row_of[up] >= 0) trip.emplace_back(row_of[up], prv_var[e], -1.0);
          continue;
        }
        add_term(ends.to, ends.from, e, 1.0);
        add_term(ends.from, ends.to, e, -1.0);
      }

      Eigen::VectorXd sol = Eigen::VectorXd::Zero(n_unknown);
      if (n_unknown > 0) {
        Eigen::SparseMatrix<double> a(n_rows, n_unknown);
        a.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "hydraulic system is singular");
        sol = lu.solve(rhs);
        if (lu.info() != Eigen::Success || !sol.allFinite())
          throw Error(ErrorCode::SingularSystem, "hydraulic solve failed");
      }
      for (std::size_t i = 0; i < n; ++i)
        if (head_var[i] >= 0) head[i] = sol[head_var[i]];

      energy_residual = 0.0;
      for (std::size_t e = 0; e < m; ++e) {
        auto ends = net.endpoints(e);
        if (active[e]) {
          const double qp = sol[prv_var[e]];
          q[e] = downstream[e] == ends.to ? qp : -qp;
          continue;
        }
        q[e] = c[e] + w[e] * (head[ends.from] - head[ends.to]);
        const double loss = r[e] * q[e] * std::pow(std::fabs(q[e]), kFlowExponent - 1.0);
        energy_residual = std::max(energy_residual, std::fabs(loss - (head[ends.from] - head[ends.to])));
      }
      if (!std::isfinite(energy_residual)) break;
      if (energy_residual < cfg.head_tolerance) {
        converged = true;
        ++iter;
        break;
      }
    }

    Snapshot snap;
    snap.pressures.resize(n);
    for (std::size_t i = 0; i < n; ++i) snap.pressures[i] = head[i] + datum - net.node(i).elevation;
    snap.flows.resize(m);
    for (std::size_t e = 0; e < m; ++e) snap.flows[e] = q[e] * kLitersPerCubicMeter;
    snap.demands.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (!fixed[i]) snap.demands[i] = demands_lps[i];
    const double balance = mass_balance_residual(net, snap);
    if (!converged || !(balance < cfg.tolerance))
      throw Error(ErrorCode::NoConvergence, "after " + std::to_string(iter) + " iterations: head residual " +
                                                detail::sci(energy_residual) + " m, mass residual " + detail::sci(balance) + " L/s");

    bool changed = false;
    for (std::size_t e = 0; e < m; ++e) {
      if (!net.edge(e).is_prv) continue;
      auto ends = net.endpoints(e);
      if (!active[e]) {
        const std::size_t dn = q[e] >= 0.0 ? ends.to : ends.from;
        const std::size_t up = dn == ends.to ? ends.from : ends.to;
        downstream[e] = dn;
        if (!fixed[dn] && head[dn] > cap_of(e) + cfg.head_tolerance && head[up] > cap_of(e)) {
          active[e] = true;
          changed = true;
        }
      } else {
        const std::size_t up = downstream[e] == ends.to ? ends.from : ends.to;
        const double qp = downstream[e] == ends.to ? q[e] : -q[e];
        if (qp < 0.0 || head[up] < cap_of(e)) {
          active[e] = false;
          changed = true;
        }
      }
    }
    if (!changed) return snap;
  }
  throw Error(ErrorCode::NoConvergence, "PRV statuses did not settle after " +
                                            std::to_string(cfg.max_status_rounds) + " rounds");
}

enum class DemandKind { Smooth, Noisy };

/// Demand matrix [T x N] (L/s) with T = 96 * days. Smooth demands follow a
/// daily sinusoid with a per-node phase; noisy demands multiply that by
/// (1 + eta), eta ~ U(-0.2, 0.2) per node and step.
inline Tensor generate_demand_patterns(DemandKind kind, std::size_t days, const std::vector<double>& base_demands,
                                       std::uint64_t seed) {
  if (days < 1) throw Error(ErrorCode::ConfigError, "days must be >= 1");
  const std::size_t n = base_demands.size();
  const std::size_t steps = days * kStepsPerDay;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::vector<double> phase(n);
  for (auto& p : phase) p = phase_dist(rng);
  std::uniform_real_distribution<double> noise(-0.2, 0.2);
  Tensor out(steps, n);
  for (std::size_t t = 0; t < steps; ++t) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(t % kStepsPerDay) / kStepsPerDay;
    for (std::size_t i = 0; i < n; ++i) {
      double v = base_demands[i] * (1.0 + 0.5 * std::sin(angle - phase[i]));
      if (kind == DemandKind::Noisy) v *= 1.0 + noise(rng);
      out(t, i) = std::max(0.0, v);
    }
  }
  return out;
}

/// Solves every row of `demands`; snapshot timesteps start at `first_timestep`.
inline std::vector<Snapshot> simulate(const WaterNetwork& net, const Tensor& demands, const SolverConfig& cfg = {},
                                      std::size_t first_timestep = 0) {
  if (demands.cols() != net.node_count())
    throw Error(ErrorCode::ShapeMismatch, "demand matrix " + demands.shape_string() + " for " +
                                              std::to_string(net.node_count()) + " nodes");
  std::vector<Snapshot> out;
  out.reserve(demands.rows());
  for (std::size_t t = 0; t < demands.rows(); ++t) {
    auto row = demands.row(t);
    try {
      auto snap = solve_steady_state(net, std::vector<double>(row.begin(), row.end()), {}, cfg);
      snap.timestep = first_timestep + t;
      out.push_back(std::move(snap));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoConvergence) throw;
      throw Error(ErrorCode::NoConvergence, "timestep " + std::to_string(first_timestep + t) + ": " + e.detail());
    }
  }
  return out;
}

struct DatasetSplit {
  std::vector<Snapshot> train;
  std::vector<Snapshot> val;
  std::vector<Snapshot> test;
};

/// Contiguous chronological split; train = floor(0.6 n), val = floor(0.2 n),
/// test takes the remainder.
inline DatasetSplit split_chronological(std::vector<Snapshot> snaps, double train_frac = 0.6, double val_frac = 0.2) {
  const auto n = snaps.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n) + 1e-9));
  DatasetSplit s;
  auto it = std::make_move_iterator(snaps.begin());
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(it + static_cast<std::ptrdiff_t>(n_train), it + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(it + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(snaps.end()));
  return s;
}

struct HydraulicScenario {
  Tensor demands;  // [T x N], L/s
};

inline DatasetSplit generate_dataset(const WaterNetwork& net, const HydraulicScenario& scenario,
                                     const SolverConfig& cfg = {}) {
  return split_chronological(simulate(net, scenario.demands, cfg));
}

/// Base demands of the network's junctions (zero at fixed-head nodes).
inline std::vector<double> zero_fixed_heads(const WaterNetwork& net, std::vector<double> base) {
  for (auto i : net.fixed_heads()) base.at(i) = 0.0;
  return base;
}

}  // namespace hydronet::hydraulics
