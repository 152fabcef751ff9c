#include "bq/quant.hpp"

#include <cmath>
#include <string>

namespace bq {

void check_bitwidth(int k) {
  if (k < 1 || k > 8)
    throw PreconditionError("bitwidth must be in [1,8], got " + std::to_string(k));
}

double round_to_zero(double x) {
  const double r = (x >= 0.0 ? 1.0 : -1.0) * std::ceil(std::fabs(x) - 0.5);
  return r + 0.0;  // normalize -0.0
}

Tensor round_to_zero(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = round_to_zero(v);
  return out;
}

Tensor q_k(const Tensor& w, int k) {
  check_bitwidth(k);
  const double d = static_cast<double>((1 << k) - 1);
  Tensor out = w;
  for (double& v : out.data()) {
    if (v < 0.0 || v > 1.0)
      throw PreconditionError("q_k input outside [0,1]: " + std::to_string(v));
    v = round_to_zero(d * v) / d;
  }
  return out;
}

double QuantizedTensor::dequantize_code(uint8_t code) const {
  const double d = static_cast<double>((1 << bitwidth) - 1);
  if (convention == Convention::kUnitInterval) return static_cast<double>(code) / d;
  // (2c - D)/D rather than 2(c/D - 1/2): integer numerators negate exactly,
  // so mirrored codes dequantize to exact negatives.
  return scale * ((2.0 * static_cast<double>(code) - d) / d);
}

Tensor QuantizedTensor::dequantize() const {
  Tensor out(shape);
  auto d = out.data();
  for (size_t i = 0; i < codes.size(); ++i) d[i] = dequantize_code(codes[i]);
  return out;
}

QuantizedTensor quantize_uniform(const Tensor& w, int k) {
  check_bitwidth(k);
  QuantizedTensor q;
  q.shape = w.shape();
  q.bitwidth = k;
  q.convention = Convention::kSymmetric;
  q.scale = max_abs(w);
  q.codes.resize(static_cast<size_t>(w.size()), 0);
  if (q.scale == 0.0) return q;  // all-zero input: zero codes, scale 0
  const double d = static_cast<double>((1 << k) - 1);
  auto src = w.data();
  for (size_t i = 0; i < q.codes.size(); ++i) {
    const double u = src[i] / (2.0 * q.scale) + 0.5;  // phi(w) in [0,1]
    q.codes[i] = static_cast<uint8_t>(round_to_zero(d * u));
  }
  return q;
}

Tensor quant_k(const Tensor& w, int k) {
  QuantizedTensor q = quantize_uniform(w, k);
  if (q.scale == 0.0) return Tensor(w.shape());
  return q.dequantize();
}

QuantizedTensor quantize_unit(const Tensor& x, int k) {
  check_bitwidth(k);
  QuantizedTensor q;
  q.shape = x.shape();
  q.bitwidth = k;
  q.convention = Convention::kUnitInterval;
  q.scale = 1.0;
  q.codes.resize(static_cast<size_t>(x.size()), 0);
  const double d = static_cast<double>((1 << k) - 1);
  auto src = x.data();
  for (size_t i = 0; i < q.codes.size(); ++i) {
    const double v = src[i];
    if (v < 0.0 || v > 1.0)
      throw PreconditionError("quantize_unit input outside [0,1]: " + std::to_string(v));
    q.codes[i] = static_cast<uint8_t>(round_to_zero(d * v));
  }
  return q;
}

NodeId ste_custom(Graph& g, NodeId x, Tensor forward_value, const std::string& label) {
  if (!g.value(x).same_shape(forward_value)) throw DimError("ste: forward value shape mismatch");
  return g.custom(
      std::move(forward_value), {x},
      [x](Graph& gr, NodeId self) { gr.accumulate_grad(x, gr.grad(self)); }, label);
}

NodeId ste_round_to_zero(Graph& g, NodeId x) {
  return ste_custom(g, x, round_to_zero(g.value(x)), "ste_round_to_zero");
}

NodeId ste_q_k(Graph& g, NodeId x, int k) {
  return ste_custom(g, x, q_k(g.value(x), k), "ste_q_k");
}

NodeId ste_quant_k(Graph& g, NodeId x, int k) {
  return ste_custom(g, x, quant_k(g.value(x), k), "ste_quant_k");
}

}  // namespace bq
