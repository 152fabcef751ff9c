#include "bq/bitplane.hpp"

#include <bit>
#include <string>

namespace bq {

namespace {
int64_t words_for(int64_t bits) { return (bits + 63) >> 6; }

int64_t popcount_and(std::span<const uint64_t> a, std::span<const uint64_t> b) {
  int64_t acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::popcount(a[i] & b[i]);
  return acc;
}
}  // namespace

BitVector BitVector::pack(std::span<const uint8_t> values) {
  BitVector v;
  v.bits = static_cast<int64_t>(values.size());
  v.words.assign(static_cast<size_t>(words_for(v.bits)), 0);
  for (int64_t i = 0; i < v.bits; ++i) {
    const uint8_t b = values[static_cast<size_t>(i)];
    if (b > 1) throw PreconditionError("dot_1bit operands must be 0/1");
    if (b) v.words[static_cast<size_t>(i >> 6)] |= uint64_t{1} << (i & 63);
  }
  return v;
}

int64_t dot_1bit(const BitVector& x, const BitVector& y) {
  if (x.bits != y.bits) throw DimError("dot_1bit: length mismatch");
  return popcount_and(x.words, y.words);
}

BitPlaneMatrix BitPlaneMatrix::pack(std::span<const uint8_t> codes, int64_t rows, int64_t cols,
                                    int bitwidth, PlaneLayout layout) {
  if (bitwidth < 1 || bitwidth > 8) throw PreconditionError("bitwidth must be in [1,8]");
  if (static_cast<int64_t>(codes.size()) != rows * cols)
    throw DimError("pack: code count does not match rows*cols");
  const uint32_t limit = uint32_t{1} << bitwidth;
  for (uint8_t c : codes)
    if (c >= limit)
      throw PreconditionError("code " + std::to_string(int{c}) + " exceeds bitwidth " +
                              std::to_string(bitwidth));

  BitPlaneMatrix out;
  out.rows_ = rows;
  out.cols_ = cols;
  out.bitwidth_ = bitwidth;
  out.layout_ = layout;
  out.lines_ = (layout == PlaneLayout::kRowMajor) ? rows : cols;
  out.line_len_ = (layout == PlaneLayout::kRowMajor) ? cols : rows;
  out.words_per_line_ = words_for(out.line_len_);
  out.planes_.assign(static_cast<size_t>(bitwidth),
                     std::vector<uint64_t>(static_cast<size_t>(out.lines_ * out.words_per_line_), 0));
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) {
      const uint8_t code = codes[static_cast<size_t>(r * cols + c)];
      const int64_t line = (layout == PlaneLayout::kRowMajor) ? r : c;
      const int64_t pos = (layout == PlaneLayout::kRowMajor) ? c : r;
      const int64_t word = line * out.words_per_line_ + (pos >> 6);
      for (int m = 0; m < bitwidth; ++m)
        if ((code >> m) & 1)
          out.planes_[static_cast<size_t>(m)][static_cast<size_t>(word)] |= uint64_t{1}
                                                                            << (pos & 63);
    }
  }
  return out;
}

std::vector<uint8_t> BitPlaneMatrix::unpack() const {
  std::vector<uint8_t> codes(static_cast<size_t>(rows_ * cols_), 0);
  for (int64_t r = 0; r < rows_; ++r) {
    for (int64_t c = 0; c < cols_; ++c) {
      const int64_t line = (layout_ == PlaneLayout::kRowMajor) ? r : c;
      const int64_t pos = (layout_ == PlaneLayout::kRowMajor) ? c : r;
      uint8_t code = 0;
      for (int m = 0; m < bitwidth_; ++m) {
        const uint64_t word =
            planes_[static_cast<size_t>(m)][static_cast<size_t>(line * words_per_line_ + (pos >> 6))];
        code |= static_cast<uint8_t>(((word >> (pos & 63)) & 1) << m);
      }
      codes[static_cast<size_t>(r * cols_ + c)] = code;
    }
  }
  return codes;
}

std::span<const uint64_t> BitPlaneMatrix::plane(int m) const {
  return planes_[static_cast<size_t>(m)];
}

std::span<const uint64_t> BitPlaneMatrix::line(int m, int64_t index) const {
  return std::span<const uint64_t>(planes_[static_cast<size_t>(m)])
      .subspan(static_cast<size_t>(index * words_per_line_), static_cast<size_t>(words_per_line_));
}

namespace {
int64_t dot_lines(const BitPlaneMatrix& a, int64_t ai, const BitPlaneMatrix& b, int64_t bj,
                  KernelStats* stats) {
  int64_t acc = 0;
  for (int m = 0; m < a.bitwidth(); ++m) {
    for (int k = 0; k < b.bitwidth(); ++k) {
      acc += (int64_t{1} << (m + k)) * popcount_and(a.line(m, ai), b.line(k, bj));
      if (stats) ++stats->plane_passes;
    }
  }
  return acc;
}
}  // namespace

namespace {
// A vector pack must hold the whole vector in a single line.
bool single_line(const BitPlaneMatrix& v) {
  return (v.layout() == PlaneLayout::kRowMajor && v.rows() == 1) ||
         (v.layout() == PlaneLayout::kColMajor && v.cols() == 1);
}
}  // namespace

int64_t dot_multibit(const BitPlaneMatrix& x, const BitPlaneMatrix& y, KernelStats* stats) {
  if (!single_line(x) || !single_line(y)) throw DimError("dot_multibit expects vector packs");
  const int64_t nx = x.rows() * x.cols();
  const int64_t ny = y.rows() * y.cols();
  if (nx != ny) throw DimError("dot_multibit: length mismatch");
  return dot_lines(x, 0, y, 0, stats);
}

std::vector<int64_t> gemm_multibit(const BitPlaneMatrix& a, const BitPlaneMatrix& b,
                                   KernelStats* stats) {
  if (a.layout() != PlaneLayout::kRowMajor || b.layout() != PlaneLayout::kColMajor)
    throw DimError("gemm_multibit needs a row-major A and a column-major B");
  if (a.cols() != b.rows()) throw DimError("gemm_multibit: inner dimensions disagree");
  std::vector<int64_t> out(static_cast<size_t>(a.rows() * b.cols()), 0);
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t j = 0; j < b.cols(); ++j)
      out[static_cast<size_t>(i * b.cols() + j)] = dot_lines(a, i, b, j, stats);
  return out;
}

}  // namespace bq
