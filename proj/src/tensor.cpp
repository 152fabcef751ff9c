#include "bq/tensor.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace bq {

namespace {
int64_t shape_product(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e <= 0) throw DimError("tensor extents must be positive, got " + std::to_string(e));
    n *= e;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_product(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != static_cast<int64_t>(data_.size()))
    throw DimError("tensor data length does not match shape product");
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vec(std::initializer_list<double> v) {
  return Tensor({static_cast<int64_t>(v.size())}, std::vector<double>(v));
}

Tensor Tensor::vec(std::vector<double> v) {
  return Tensor({static_cast<int64_t>(v.size())}, std::move(v));
}

Tensor Tensor::matrix(int64_t rows, int64_t cols, std::initializer_list<double> v) {
  return Tensor({rows, cols}, std::vector<double>(v));
}

int64_t Tensor::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() == 2) return shape_[0];
  throw DimError("rows() requires rank 1 or 2");
}

int64_t Tensor::cols() const {
  if (shape_.size() == 1) return shape_[0];
  if (shape_.size() == 2) return shape_[1];
  throw DimError("cols() requires rank 1 or 2");
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const int64_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
  if (k != k2)
    throw DimError("matmul inner dimensions disagree: " + std::to_string(k) + " vs " +
                   std::to_string(k2));
  Tensor out({m, n});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (int64_t j = 0; j < n; ++j) out(i, j) += aip * b(p, j);
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  const int64_t m = a.rows(), n = a.cols();
  Tensor out({n, m});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out(j, i) = a(i, j);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimError("add: shape mismatch");
  Tensor out = a;
  auto d = out.data();
  auto bd = b.data();
  for (size_t i = 0; i < d.size(); ++i) d[i] += bd[i];
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimError("hadamard: shape mismatch");
  Tensor out = a;
  auto d = out.data();
  auto bd = b.data();
  for (size_t i = 0; i < d.size(); ++i) d[i] *= bd[i];
  return out;
}

Tensor affine(const Tensor& a, double scale, double shift) {
  Tensor out = a;
  for (double& v : out.data()) v = scale * v + shift;
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw DimError("concat_cols: row counts disagree");
  const int64_t m = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out({m, ca + cb});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < ca; ++j) out(i, j) = a(i, j);
    for (int64_t j = 0; j < cb; ++j) out(i, ca + j) = b(i, j);
  }
  return out;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

double max_abs(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s = std::max(s, std::fabs(v));
  return s;
}

double sigmoid_scalar(double x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v = sigmoid_scalar(v);
  return out;
}

Tensor tanh_t(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v = std::tanh(v);
  return out;
}

}  // namespace bq
