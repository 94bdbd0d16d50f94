#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hydronet/graph.hpp"

namespace hydronet::baselines {

enum class BaselineKind { MeanImputation, HarmonicInterpolation };

inline std::string to_string(BaselineKind k) {
  return k == BaselineKind::MeanImputation ? "mean" : "harmonic";
}

inline std::vector<bool> sensor_mask(std::size_t n, const std::vector<std::size_t>& sensors) {
  if (sensors.empty()) throw Error(ErrorCode::EmptySensorSet, "baseline needs at least one sensor");
  std::vector<bool> mask(n, false);
  for (auto s : sensors) {
    if (s >= n) throw Error(ErrorCode::IndexOutOfRange, "sensor " + std::to_string(s) + " >= " + std::to_string(n));
    mask[s] = true;
  }
  return mask;
}

/// Sensor nodes keep their reading; every other node gets the sensor mean.
inline std::vector<double> mean_imputation(const std::vector<double>& pressures, const std::vector<std::size_t>& sensors) {
  auto mask = sensor_mask(pressures.size(), sensors);
  double mean = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pressures.size(); ++i) {
    if (!mask[i]) continue;
    mean += pressures[i];
    ++count;
  }
  mean /= static_cast<double>(count);
  std::vector<double> out(pressures.size(), mean);
  for (std::size_t i = 0; i < pressures.size(); ++i)
    if (mask[i]) out[i] = pressures[i];
  return out;
}

struct HarmonicOptions {
  double tolerance = 1e-12;    // max |L_uu p_u + L_us p_s|
  std::size_t max_sweeps = 20000;
  std::size_t direct_limit = 2000;
};

/// max over non-sensor nodes of |deg(v) p_v - sum of neighbour values|.
inline double harmonic_residual(const WaterNetwork& net, const std::vector<double>& values,
                                const std::vector<bool>& clamped) {
  double worst = 0.0;
  for (std::size_t v = 0; v < net.node_count(); ++v) {
    if (clamped[v]) continue;
    double r = static_cast<double>(net.degree(v)) * values[v];
    for (const auto& nb : net.neighbors(v)) r -= values[nb.node];
    worst = std::max(worst, std::fabs(r));
  }
  return worst;
}

/// Harmonic extension of the sensor readings over the unweighted graph
/// Laplacian: every non-sensor node equals the mean of its neighbours.
/// Gauss-Seidel first; a sparse direct solve if that stalls.
inline std::vector<double> harmonic_interpolation(const WaterNetwork& net, const std::vector<double>& pressures,
                                                  const std::vector<std::size_t>& sensors,
                                                  const HarmonicOptions& opt = {}) {
  const std::size_t n = net.node_count();
  if (pressures.size() != n)
    throw Error(ErrorCode::ShapeMismatch, std::to_string(pressures.size()) + " values for " + std::to_string(n) + " nodes");
  auto mask = sensor_mask(n, sensors);

  double mean = 0.0;
  for (auto s : sensors) mean += pressures[s];
  mean /= static_cast<double>(sensors.size());
  std::vector<double> values(n, mean);
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) values[i] = pressures[i];

  for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    for (std::size_t v = 0; v < n; ++v) {
      if (mask[v]) continue;
      double s = 0.0;
      for (const auto& nb : net.neighbors(v)) s += values[nb.node];
      values[v] = s / static_cast<double>(net.degree(v));
    }
    if (sweep % 8 == 7 && harmonic_residual(net, values, mask) < opt.tolerance) return values;
  }
  if (harmonic_residual(net, values, mask) < opt.tolerance) return values;
  if (n > opt.direct_limit)
    throw Error(ErrorCode::SingularSystem, "Gauss-Seidel did not converge and the graph exceeds the direct-solve limit");

  std::vector<std::ptrdiff_t> var(n, -1);
  std::ptrdiff_t unknowns = 0;
  for (std::size_t v = 0; v < n; ++v)
    if (!mask[v]) var[v] = unknowns++;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns);
  for (std::size_t v = 0; v < n; ++v) {
    if (var[v] < 0) continue;
    trip.emplace_back(var[v], var[v], static_cast<double>(net.degree(v)));
    for (const auto& nb : net.neighbors(v)) {
      if (var[nb.node] >= 0)
        trip.emplace_back(var[v], var[nb.node], -1.0);
      else
        rhs[var[v]] += pressures[nb.node];
    }
  }
  Eigen::SparseMatrix<double> a(unknowns, unknowns);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "harmonic system is singular");
  Eigen::VectorXd sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !sol.allFinite()) throw Error(ErrorCode::SingularSystem, "harmonic solve failed");
  for (std::size_t v = 0; v < n; ++v)
    if (var[v] >= 0) values[v] = sol[var[v]];
  return values;
}

inline std::vector<double> run(BaselineKind kind, const WaterNetwork& net, const std::vector<double>& pressures,
                               const std::vector<std::size_t>& sensors) {
  return kind == BaselineKind::MeanImputation ? mean_imputation(pressures, sensors)
                                              : harmonic_interpolation(net, pressures, sensors);
}

}  // namespace hydronet::baselines
