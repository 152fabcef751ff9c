#pragma once

#include "bq/autodiff.hpp"
#include "bq/quant.hpp"

namespace bq {

// True when every entry of w lies exactly on the symmetric 2^bits-point grid
// spanned by max|w| (the set quant_k emits).
bool on_symmetric_grid(const Tensor& w, int bits);

// Weight nodes for one GRU cell. Matrices are (hidden+input) x hidden and
// must already hold quantized values in [-1,1]. Biases are an extension and
// default to absent (the recurrence is bias-free as written).
struct GruWeights {
  NodeId w_update = -1;     // z gate
  NodeId w_reset = -1;      // r gate
  NodeId w_candidate = -1;  // h~
  int weight_bits = 1;
  NodeId bias_update = -1;
  NodeId bias_reset = -1;
  NodeId bias_candidate = -1;
};

struct GruStepResult {
  NodeId h = -1;         // quantized hidden state, on the k-bit unit grid
  NodeId pre_quant = -1; // convex combination before Q_k, in [0,1]
};

// One quantized GRU step:
//   z = sigmoid(W_z [h,x]); r = sigmoid(W_r [h,x]);
//   h~ = sigmoid(W [Q_k(r o h), x]);
//   h' = Q_k((1-z) o h + z o h~)
// The candidate activation is sigmoid so the combination stays in [0,1].
// apply_quantizers=false replaces both Q_k sites with identity (the smooth
// surrogate used by gradient checks).
GruStepResult gru_step(Graph& g, NodeId h_prev, NodeId x_t, const GruWeights& w, int k,
                       bool apply_quantizers = true);

struct LstmWeights {
  NodeId w_forget = -1;
  NodeId w_input = -1;
  NodeId w_candidate = -1;
  NodeId w_output = -1;
  int weight_bits = 1;
  NodeId bias_forget = -1;
  NodeId bias_input = -1;
  NodeId bias_candidate = -1;  // distinct from the input-gate bias
  NodeId bias_output = -1;
};

struct LstmStepResult {
  NodeId h = -1;         // quantized, on the k-bit unit grid
  NodeId c = -1;         // cell state, stays real-valued
  NodeId pre_quant = -1; // o o sigmoid(C), in [0,1]
};

// One quantized LSTM step:
//   f,i,o = sigmoid(W [h,x] + b); C~ = tanh(W_C [h,x] + b_C);
//   C' = f o C + i o C~; h' = Q_k(o o sigmoid(C'))
// The cell state is exempt from the code grid; the output tanh is replaced
// by sigmoid so h' lands in [0,1].
LstmStepResult lstm_step(Graph& g, NodeId h_prev, NodeId c_prev, NodeId x_t,
                         const LstmWeights& w, int k, bool apply_quantizers = true);

}  // namespace bq
