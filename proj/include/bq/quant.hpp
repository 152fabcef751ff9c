#pragma once

#include <cstdint>
#include <vector>

#include "bq/autodiff.hpp"
#include "bq/tensor.hpp"

namespace bq {

// Round half toward zero: sgn(x) * ceil(|x| - 1/2). 0.5 -> 0, -0.5 -> 0,
// 1.5 -> 1, -1.5 -> -1. Odd function, halves included.
double round_to_zero(double x);
Tensor round_to_zero(const Tensor& x);

// k-bit uniform quantizer on [0,1]: round_to_zero((2^k-1) w) / (2^k-1).
// Output values lie in {0, 1/(2^k-1), ..., 1}. Throws PreconditionError on
// inputs outside [0,1] or k outside [1,8].
Tensor q_k(const Tensor& w, int k);

enum class Convention : uint8_t {
  kUnitInterval,  // dequant(c) = c / (2^k - 1), values in [0, 1]
  kSymmetric,     // dequant(c) = 2*scale*(c/(2^k-1) - 1/2), values in [-scale, scale]
};

// Integer codes plus the affine map back to reals. Codes fit one byte
// (bitwidth capped at 8).
struct QuantizedTensor {
  std::vector<int64_t> shape;
  std::vector<uint8_t> codes;
  int bitwidth = 1;
  double scale = 0.0;  // max|W| for symmetric, unused (1.0) for unit-interval
  Convention convention = Convention::kSymmetric;

  int64_t size() const { return static_cast<int64_t>(codes.size()); }
  int levels() const { return 1 << bitwidth; }
  double dequantize_code(uint8_t code) const;
  Tensor dequantize() const;
};

// Symmetric k-bit quantization of an arbitrary real tensor (phi / Q_k /
// phi^-1 round trip). An all-zero input quantizes to all-zero codes with
// scale 0.
QuantizedTensor quantize_uniform(const Tensor& w, int k);

// Real-valued view of quantize_uniform (the quant_k map itself).
Tensor quant_k(const Tensor& w, int k);

// k-bit quantization of values already in [0,1] (activations).
QuantizedTensor quantize_unit(const Tensor& x, int k);

// Straight-through estimator nodes: forward applies the quantizer, backward
// passes the incoming gradient through unchanged.
NodeId ste_round_to_zero(Graph& g, NodeId x);
NodeId ste_q_k(Graph& g, NodeId x, int k);
NodeId ste_quant_k(Graph& g, NodeId x, int k);
// Generic STE over any tensor-to-same-shape-tensor forward.
NodeId ste_custom(Graph& g, NodeId x, Tensor forward_value, const std::string& label);

void check_bitwidth(int k);

}  // namespace bq
