#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "bq/errors.hpp"

namespace bq {

// Dense row-major array of 64-bit reals. Rank is arbitrary but every
// operation in this library works on rank-1 vectors or rank-2 matrices.
// Values are plain doubles; quantized codes live in QuantizedTensor instead.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor vec(std::initializer_list<double> v);
  static Tensor vec(std::vector<double> v);
  static Tensor matrix(int64_t rows, int64_t cols, std::initializer_list<double> v);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }

  // 2-D accessors; a rank-1 tensor counts as a single row.
  int64_t rows() const;
  int64_t cols() const;

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  double& operator()(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * cols() + c)]; }
  double operator()(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * cols() + c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

// Raw (graph-free) tensor math. The autodiff ops call into these.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor affine(const Tensor& a, double scale, double shift);
Tensor concat_cols(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double max_abs(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);

double sigmoid_scalar(double x);

}  // namespace bq
