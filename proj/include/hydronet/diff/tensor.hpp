#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hydronet/error.hpp"

namespace hydronet::diff {

/// Dense row-major float-64 matrix. Scalars are 1x1 and vectors are n x 1;
/// every operation in the engine works on this rank-2 form.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw Error(ErrorCode::ShapeMismatch, "tensor " + shape_string() + " given " +
                                                std::to_string(data_.size()) + " values");
  }

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor column(std::vector<double> v) {
    auto n = v.size();
    return Tensor(n, 1, std::move(v));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  double item() const {
    if (size() != 1) throw Error(ErrorCode::ShapeMismatch, "item() on " + shape_string());
    return data_[0];
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace kernel {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

inline ConstMap view(const Tensor& t) {
  return ConstMap(t.values().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
inline MutMap view(Tensor& t) {
  return MutMap(t.values().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

// out[n x m] += a[n x k] * b[k x m]
inline void gemm_nn(const Tensor& a, const Tensor& b, Tensor& out) { view(out).noalias() += view(a) * view(b); }

// out[n x k] += a[n x m] * b[k x m]^T
inline void gemm_nt(const Tensor& a, const Tensor& b, Tensor& out) {
  view(out).noalias() += view(a) * view(b).transpose();
}

// out[k x m] += a[n x k]^T * b[n x m]
inline void gemm_tn(const Tensor& a, const Tensor& b, Tensor& out) {
  view(out).noalias() += view(a).transpose() * view(b);
}

}  // namespace kernel

}  // namespace hydronet::diff
