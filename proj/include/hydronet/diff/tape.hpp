#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hydronet/diff/tensor.hpp"

namespace hydronet::diff {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

using IndexList = std::shared_ptr<const std::vector<std::size_t>>;

inline IndexList make_index(std::vector<std::size_t> idx) {
  return std::make_shared<const std::vector<std::size_t>>(std::move(idx));
}

/// Records primitive applications in execution order so that a reverse sweep
/// can propagate gradients. One tape per forward pass; not thread-safe.
class Tape {
 public:
  // Accumulates the gradient of the recorded node into its inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Var leaf(Tensor value) { return push(std::move(value), true, {}); }
  Var constant(Tensor value) { return push(std::move(value), false, {}); }

  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op) {
    if (!value.all_finite()) throw Error(ErrorCode::NonFiniteValue, std::string(op) + " produced a non-finite value");
    bool needs_grad = false;
    for (auto in : inputs) needs_grad = needs_grad || nodes_.at(in).requires_grad;
    Var v = push(std::move(value), needs_grad, std::move(inputs));
    if (needs_grad) nodes_.back().backward = std::move(fn);
    return v;
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient of the last backward() target with respect to `v`; zeros when
  /// `v` did not influence it.
  Tensor grad(Var v) const {
    const auto& n = nodes_.at(v.id);
    if (n.grad.size() == 0) return Tensor(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Incoming gradient of node `id` during the reverse sweep.
  const Tensor& upstream(std::size_t id) const { return nodes_.at(id).grad; }

  /// Gradient buffer of input `id`, or nullptr when it needs no gradient.
  Tensor* grad_buffer(std::size_t id) {
    auto& n = nodes_.at(id);
    if (!n.requires_grad) return nullptr;
    if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Tensor(n.value.rows(), n.value.cols());
    return &n.grad;
  }

  void backward(Var loss) {
    if (loss.tape != this) throw Error(ErrorCode::ShapeMismatch, "loss recorded on another tape");
    const auto& lv = nodes_.at(loss.id).value;
    if (lv.size() != 1) throw Error(ErrorCode::NonScalarLoss, "loss has shape " + lv.shape_string());
    for (auto& n : nodes_) n.grad = Tensor();
    if (!nodes_[loss.id].requires_grad) return;
    nodes_[loss.id].grad = Tensor::scalar(1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, i);
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, std::vector<std::size_t> inputs) {
    for (auto in : inputs)
      if (in >= nodes_.size()) throw Error(ErrorCode::IndexOutOfRange, "tape input precedes its definition");
    nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, std::move(inputs), {}});
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

struct SeluConstants {
  static constexpr double lambda = 1.0507009873554805;
  static constexpr double alpha = 1.6732632423543772;
};

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
}

inline void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) throw Error(ErrorCode::ShapeMismatch, "operands on different tapes");
}

inline void axpy(double s, const Tensor& x, Tensor& y) {
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < xv.size(); ++i) yv[i] += s * xv[i];
}

inline double selu_value(double x) {
  constexpr double l = SeluConstants::lambda, a = SeluConstants::alpha;
  return x > 0.0 ? l * x : l * a * std::expm1(x);
}

inline double selu_slope(double x) {
  constexpr double l = SeluConstants::lambda, a = SeluConstants::alpha;
  return x >= 0.0 ? l : l * a * std::exp(x);
}

inline double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows())
    throw Error(ErrorCode::ShapeMismatch, "matmul: " + av.shape_string() + " * " + bv.shape_string());
  Tensor out(av.rows(), bv.cols());
  kernel::gemm_nn(av, bv, out);
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (auto* ga = t.grad_buffer(ia)) kernel::gemm_nt(g, t.value(ib), *ga);
    if (auto* gb = t.grad_buffer(ib)) kernel::gemm_tn(t.value(ia), g, *gb);
  }, "matmul");
}

inline Var add(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  detail::axpy(1.0, b.value(), out);
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (auto* ga = t.grad_buffer(ia)) detail::axpy(1.0, g, *ga);
    if (auto* gb = t.grad_buffer(ib)) detail::axpy(1.0, g, *gb);
  }, "add");
}

inline Var sub(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  detail::axpy(-1.0, b.value(), out);
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (auto* ga = t.grad_buffer(ia)) detail::axpy(1.0, g, *ga);
    if (auto* gb = t.grad_buffer(ib)) detail::axpy(-1.0, g, *gb);
  }, "sub");
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    if (auto* ga = t.grad_buffer(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    if (auto* gb = t.grad_buffer(ib))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
  }, "mul");
}

/// x[n x d] + b[1 x d] applied to every row.
inline Var add_rowwise(Var x, Var b) {
  detail::require_same_tape(x, b);
  const auto& xv = x.value();
  const auto& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols())
    throw Error(ErrorCode::ShapeMismatch, "add_rowwise: " + xv.shape_string() + " + " + bv.shape_string());
  Tensor out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  const auto ix = x.id, ib = b.id;
  return x.tape->record(std::move(out), {ix, ib}, [ix, ib](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (auto* gx = t.grad_buffer(ix)) detail::axpy(1.0, g, *gx);
    if (auto* gb = t.grad_buffer(ib)) {
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto row = g.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) (*gb)[c] += row[c];
      }
    }
  }, "add_rowwise");
}

inline Var mul_scalar(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  const auto ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, s](Tape& t, std::size_t self) {
    if (auto* ga = t.grad_buffer(ia)) detail::axpy(s, t.upstream(self), *ga);
  }, "mul_scalar");
}

/// Elementwise |a|; the subgradient at 0 is 0.
inline Var abs_elem(Var a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = std::fabs(v);
  const auto ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& av = t.value(ia);
    if (auto* ga = t.grad_buffer(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * detail::sign0(av[i]);
  }, "abs_elem");
}

/// Scaled exponential linear unit. At 0 the slope of the positive branch is used.
inline Var selu(Var a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = detail::selu_value(v);
  const auto ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& av = t.value(ia);
    if (auto* ga = t.grad_buffer(ia))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * detail::selu_slope(av[i]);
  }, "selu");
}

/// [a | b] along the feature (column) axis.
inline Var concat_cols(Var a, Var b) {
  detail::require_same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() != bv.rows())
    throw Error(ErrorCode::ShapeMismatch, "concat_cols: " + av.shape_string() + " | " + bv.shape_string());
  const std::size_t ca = av.cols(), cb = bv.cols();
  Tensor out(av.rows(), ca + cb);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto dst = out.row(r);
    auto ra = av.row(r);
    auto rb = bv.row(r);
    std::copy(ra.begin(), ra.end(), dst.begin());
    std::copy(rb.begin(), rb.end(), dst.begin() + static_cast<std::ptrdiff_t>(ca));
  }
  const auto ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib, ca, cb](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    auto* ga = t.grad_buffer(ia);
    auto* gb = t.grad_buffer(ib);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto src = g.row(r);
      if (ga) {
        auto dst = ga->row(r);
        for (std::size_t c = 0; c < ca; ++c) dst[c] += src[c];
      }
      if (gb) {
        auto dst = gb->row(r);
        for (std::size_t c = 0; c < cb; ++c) dst[c] += src[ca + c];
      }
    }
  }, "concat_cols");
}

/// out[i] = x[index[i]]
inline Var gather_rows(Var x, IndexList index) {
  const auto& xv = x.value();
  const std::size_t d = xv.cols();
  Tensor out(index->size(), d);
  for (std::size_t i = 0; i < index->size(); ++i) {
    auto src = (*index)[i];
    if (src >= xv.rows())
      throw Error(ErrorCode::IndexOutOfRange,
                  "gather_rows: index " + std::to_string(src) + " >= " + std::to_string(xv.rows()));
    auto s = xv.row(src);
    std::copy(s.begin(), s.end(), out.row(i).begin());
  }
  const auto ix = x.id;
  return x.tape->record(std::move(out), {ix}, [ix, index](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (auto* gx = t.grad_buffer(ix)) {
      for (std::size_t i = 0; i < index->size(); ++i) {
        auto dst = gx->row((*index)[i]);
        auto src = g.row(i);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
    }
  }, "gather_rows");
}

inline Var gather_rows(Var x, std::vector<std::size_t> index) { return gather_rows(x, make_index(std::move(index))); }

/// out[targets[i]] += messages[i]; rows of out never targeted are zero.
inline Var scatter_sum(Var messages, IndexList targets, std::size_t n) {
  const auto& mv = messages.value();
  if (targets->size() != mv.rows())
    throw Error(ErrorCode::ShapeMismatch, "scatter_sum: " + std::to_string(targets->size()) + " targets for " +
                                              mv.shape_string() + " messages");
  Tensor out(n, mv.cols());
  for (std::size_t i = 0; i < targets->size(); ++i) {
    auto dst_row = (*targets)[i];
    if (dst_row >= n)
      throw Error(ErrorCode::IndexOutOfRange,
                  "scatter_sum: target " + std::to_string(dst_row) + " >= " + std::to_string(n));
    auto dst = out.row(dst_row);
    auto src = mv.row(i);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
  }
  const auto im = messages.id;
  return messages.tape->record(std::move(out), {im}, [im, targets](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (auto* gm = t.grad_buffer(im)) {
      for (std::size_t i = 0; i < targets->size(); ++i) {
        auto src = g.row((*targets)[i]);
        auto dst = gm->row(i);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
    }
  }, "scatter_sum");
}

inline Var scatter_sum(Var messages, std::vector<std::size_t> targets, std::size_t n) {
  return scatter_sum(messages, make_index(std::move(targets)), n);
}

inline Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const auto ia = a.id;
  return a.tape->record(Tensor::scalar(s), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0];
    if (auto* ga = t.grad_buffer(ia))
      for (auto& v : ga->values()) v += g;
  }, "sum");
}

/// Mean absolute difference, (1/n) * sum |a - b|.
inline Var l1(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a.value(), b.value(), "l1");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.size() == 0) throw Error(ErrorCode::ShapeMismatch, "l1 of empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += std::fabs(av[i] - bv[i]);
  const double inv_n = 1.0 / static_cast<double>(av.size());
  const auto ia = a.id, ib = b.id;
  return a.tape->record(Tensor::scalar(s * inv_n), {ia, ib}, [ia, ib, inv_n](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0] * inv_n;
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    auto* ga = t.grad_buffer(ia);
    auto* gb = t.grad_buffer(ib);
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double s = g * detail::sign0(av[i] - bv[i]);
      if (ga) (*ga)[i] += s;
      if (gb) (*gb)[i] -= s;
    }
  }, "l1");
}

/// x * W + b, with W [in x out] and b [1 x out].
inline Var linear(Var x, Var weight, Var bias) { return add_rowwise(matmul(x, weight), bias); }

}  // namespace hydronet::diff
