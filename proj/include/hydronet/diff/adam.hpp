#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hydronet/diff/tensor.hpp"

namespace hydronet::diff {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// One bias-corrected Adam update over a list of parameter tensors. The
/// moment buffers are created on the first call.
inline void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state,
                      const AdamOptions& opt) {
  if (params.size() != grads.size())
    throw Error(ErrorCode::ShapeMismatch, "adam_step: " + std::to_string(params.size()) + " params, " +
                                              std::to_string(grads.size()) + " grads");
  if (state.first_moment.empty()) {
    for (auto* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.first_moment.size() != params.size())
    throw Error(ErrorCode::ShapeMismatch, "adam_step: state tracks a different parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.first_moment[i]))
      throw Error(ErrorCode::ShapeMismatch, "adam_step: parameter " + std::to_string(i) + " is " +
                                                params[i]->shape_string() + ", gradient " +
                                                grads[i].shape_string());
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i].values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k] + opt.weight_decay * p[k];
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * gk;
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * gk * gk;
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
    }
  }
}

}  // namespace hydronet::diff
