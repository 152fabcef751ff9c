#include "bq/rnn.hpp"

#include <cmath>

namespace bq {

bool on_symmetric_grid(const Tensor& w, int bits) {
  check_bitwidth(bits);
  const double s = max_abs(w);
  if (s == 0.0) return true;
  const double d = static_cast<double>((1 << bits) - 1);
  for (double v : w.data()) {
    const double j = std::round((v / (2.0 * s) + 0.5) * d);
    if (j < 0.0 || j > d) return false;
    if (v != s * ((2.0 * j - d) / d)) return false;
  }
  return true;
}

namespace {

void check_weight(const Graph& g, NodeId w, int bits, const char* name) {
  if (w < 0) throw ContractError(std::string("missing weight node: ") + name);
  const Tensor& v = g.value(w);
  if (max_abs(v) > 1.0)
    throw ContractError(std::string(name) + " exceeds [-1,1]; quantize weights first");
  if (!on_symmetric_grid(v, bits))
    throw ContractError(std::string(name) + " is not on the " + std::to_string(bits) +
                        "-bit quantization grid");
}

void check_unit_range(const Graph& g, NodeId x, const char* name) {
  for (double v : g.value(x).data())
    if (v < 0.0 || v > 1.0)
      throw ContractError(std::string(name) + " has entries outside [0,1]");
}

NodeId gate(Graph& g, NodeId hx, NodeId w, NodeId bias) {
  NodeId z = g.matmul(hx, w);
  if (bias >= 0) z = g.add_rowvec(z, bias);
  return g.sigmoid(z);
}

}  // namespace

GruStepResult gru_step(Graph& g, NodeId h_prev, NodeId x_t, const GruWeights& w, int k,
                       bool apply_quantizers) {
  check_bitwidth(k);
  check_weight(g, w.w_update, w.weight_bits, "GRU update weight");
  check_weight(g, w.w_reset, w.weight_bits, "GRU reset weight");
  check_weight(g, w.w_candidate, w.weight_bits, "GRU candidate weight");
  check_unit_range(g, h_prev, "GRU h_prev");
  check_unit_range(g, x_t, "GRU x_t");

  const NodeId hx = g.concat_cols(h_prev, x_t);
  const NodeId z = gate(g, hx, w.w_update, w.bias_update);
  const NodeId r = gate(g, hx, w.w_reset, w.bias_reset);

  NodeId rh = g.hadamard(r, h_prev);
  if (apply_quantizers) rh = ste_q_k(g, rh, k);
  const NodeId cand = gate(g, g.concat_cols(rh, x_t), w.w_candidate, w.bias_candidate);

  // (1-z) o h + z o h~ : convex combination of [0,1] quantities.
  const NodeId keep = g.hadamard(g.affine(z, -1.0, 1.0), h_prev);
  const NodeId pre = g.add(keep, g.hadamard(z, cand));

  GruStepResult res;
  res.pre_quant = pre;
  res.h = apply_quantizers ? ste_q_k(g, pre, k) : pre;
  return res;
}

LstmStepResult lstm_step(Graph& g, NodeId h_prev, NodeId c_prev, NodeId x_t,
                         const LstmWeights& w, int k, bool apply_quantizers) {
  check_bitwidth(k);
  check_weight(g, w.w_forget, w.weight_bits, "LSTM forget weight");
  check_weight(g, w.w_input, w.weight_bits, "LSTM input weight");
  check_weight(g, w.w_candidate, w.weight_bits, "LSTM candidate weight");
  check_weight(g, w.w_output, w.weight_bits, "LSTM output weight");
  check_unit_range(g, h_prev, "LSTM h_prev");
  check_unit_range(g, x_t, "LSTM x_t");

  const NodeId hx = g.concat_cols(h_prev, x_t);
  const NodeId f = gate(g, hx, w.w_forget, w.bias_forget);
  const NodeId i = gate(g, hx, w.w_input, w.bias_input);
  NodeId cand = g.matmul(hx, w.w_candidate);
  if (w.bias_candidate >= 0) cand = g.add_rowvec(cand, w.bias_candidate);
  cand = g.tanh(cand);
  const NodeId o = gate(g, hx, w.w_output, w.bias_output);

  const NodeId c_t = g.add(g.hadamard(f, c_prev), g.hadamard(i, cand));
  const NodeId pre = g.hadamard(o, g.sigmoid(c_t));

  LstmStepResult res;
  res.c = c_t;
  res.pre_quant = pre;
  res.h = apply_quantizers ? ste_q_k(g, pre, k) : pre;
  return res;
}

}  // namespace bq
