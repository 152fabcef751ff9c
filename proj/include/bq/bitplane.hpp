#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bq/errors.hpp"

namespace bq {

// Packed bit string. Bit i lives in word i/64 at position i%64 (little-endian
// bit order within the word); tail bits past `bits` are zero so popcount over
// whole words is exact.
struct BitVector {
  std::vector<uint64_t> words;
  int64_t bits = 0;

  static BitVector pack(std::span<const uint8_t> values);
  bool get(int64_t i) const { return (words[static_cast<size_t>(i >> 6)] >> (i & 63)) & 1u; }
};

// sum_i x_i * y_i for 0/1 vectors, via AND + popcount.
int64_t dot_1bit(const BitVector& x, const BitVector& y);

enum class PlaneLayout : uint8_t {
  kRowMajor,  // plane words pack each row contiguously
  kColMajor,  // plane words pack each column contiguously (the B side of a GEMM)
};

// Optional instrumentation for the plane-pass complexity law.
struct KernelStats {
  uint64_t plane_passes = 0;
};

// A code matrix split into `bitwidth` bit planes; plane m holds bit m of
// every entry. Reconstruction is sum_m plane_m * 2^m.
class BitPlaneMatrix {
 public:
  static BitPlaneMatrix pack(std::span<const uint8_t> codes, int64_t rows, int64_t cols,
                             int bitwidth, PlaneLayout layout = PlaneLayout::kRowMajor);

  std::vector<uint8_t> unpack() const;

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }
  int bitwidth() const { return bitwidth_; }
  PlaneLayout layout() const { return layout_; }
  int64_t words_per_line() const { return words_per_line_; }

  // Packed words of one plane; lines are rows (kRowMajor) or columns.
  std::span<const uint64_t> plane(int m) const;
  std::span<const uint64_t> line(int m, int64_t index) const;

 private:
  int64_t rows_ = 0, cols_ = 0;
  int bitwidth_ = 0;
  PlaneLayout layout_ = PlaneLayout::kRowMajor;
  int64_t lines_ = 0;           // rows (row-major) or cols (col-major)
  int64_t line_len_ = 0;        // logical bits per line
  int64_t words_per_line_ = 0;
  std::vector<std::vector<uint64_t>> planes_;
};

// Integer dot product of two code vectors (1 x n packs), as
// sum_{m,k} 2^(m+k) * popcount(and(plane_m(x), plane_k(y))).
int64_t dot_multibit(const BitPlaneMatrix& x, const BitPlaneMatrix& y,
                     KernelStats* stats = nullptr);

// Integer GEMM on codes: a is row-major m x k, b is col-major k x n.
// Result entries are exact 64-bit sums of code products.
std::vector<int64_t> gemm_multibit(const BitPlaneMatrix& a, const BitPlaneMatrix& b,
                                   KernelStats* stats = nullptr);

}  // namespace bq
