#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bq/bitplane.hpp"
#include "bq/tensor.hpp"

namespace bq {

enum class Activation : uint8_t { kSigmoid = 0, kIdentity = 1 };

// Monotone scalar activation described by its inverse and open output range.
struct MonotoneActivation {
  std::function<double(double)> inverse;
  bool increasing = true;
  double range_lo;
  double range_hi;
};

MonotoneActivation sigmoid_activation();
MonotoneActivation identity_activation();
MonotoneActivation activation_spec(Activation a);

// Decision grid for A-bit activation quantization: midpoints between the
// output levels j/(2^A-1), i.e. h_j = (2j-1)/(2(2^A-1)) for j = 1..2^A-1.
// Codes are #{j : v > h_j}, which reproduces round-half-toward-zero exactly.
std::vector<double> activation_grid_midpoints(int activation_bits);
uint8_t code_from_unit(double v, int activation_bits);

// Precomputed integer cut points for one output unit: comparing the integer
// accumulator against `thresholds` reproduces Q_A(sigma(alpha*acc + b)).
// The rational grid scale is folded into alpha, so scale_exponent stays 0
// and thresholds are floor((sigma^-1(h_j) - b) / alpha).
struct ThresholdTable {
  int scale_exponent = 0;  // K
  std::vector<int64_t> thresholds;
  double alpha = 0.0;  // retained for audit only
  double bias = 0.0;   // audit only
  bool ascending = true;
  bool constant = false;  // alpha == 0: every input yields constant_code
  uint8_t constant_code = 0;

  uint8_t code_for(int64_t acc) const;
};

// alpha must be nonzero unless the constant-table path is intended (alpha ==
// 0 yields a table that always outputs Q_A(sigma(b))). Throws ContractError
// if sigma is not monotone over the grid.
ThresholdTable precompute_thresholds(double alpha, double b, const MonotoneActivation& sigma,
                                     int activation_bits, int scale_exponent = 0);

// Whole-layer plan: one table per output unit (biases differ per unit).
struct LayerFixedPlan {
  int weight_bits = 1;
  int input_bits = 1;
  int activation_bits = 1;
  std::vector<ThresholdTable> units;
};

// Builds the plan for a layer with symmetric weight codes (scale w_scale,
// denominator 2^w_bits-1), unit-interval input codes, per-unit biases and
// activation act. alpha = w_scale / ((2^w_bits - 1) * (2^x_bits - 1)).
LayerFixedPlan plan_layer(double w_scale, int w_bits, int x_bits, const Tensor& biases,
                          Activation act, int activation_bits);

// Integer-only layer evaluation. x_codes is batch x in (unit-interval codes),
// w_codes is in x out (symmetric codes). Output: batch x out activation
// codes, bit-identical to the float reference path.
std::vector<uint8_t> eval_layer_fixed(std::span<const uint8_t> x_codes, int64_t batch, int64_t in,
                                      std::span<const uint8_t> w_codes, int64_t out,
                                      const LayerFixedPlan& plan);

// Integer accumulators acc = sum_j (2*w_code - Dw) * x_code for the same
// layer orientation; exposed for the classifier head.
std::vector<int64_t> layer_accumulators(std::span<const uint8_t> x_codes, int64_t batch,
                                        int64_t in, std::span<const uint8_t> w_codes, int64_t out,
                                        int w_bits, int x_bits);

// Float reference for the same layer: dequantize, matmul, activation, code.
std::vector<uint8_t> reference_layer_codes(std::span<const uint8_t> x_codes, int64_t batch,
                                           int64_t in, std::span<const uint8_t> w_codes,
                                           int64_t out, double w_scale, int w_bits, int x_bits,
                                           const Tensor& biases, Activation act,
                                           int activation_bits);

// Integer argmax over sigma(alpha*acc_c + b_c): class c beats the incumbent
// i iff acc_c - acc_i > tau(i,c) with tau = floor((b_i - b_c)/alpha). Ties
// keep the earlier index, matching a first-max float argmax.
struct ArgmaxHead {
  int classes = 0;
  std::vector<int64_t> tau;  // classes x classes, row = incumbent
  bool constant = false;     // alpha == 0: winner fixed by biases
  int constant_winner = 0;
};

ArgmaxHead plan_argmax_head(double alpha, const Tensor& biases);
int eval_argmax_fixed(std::span<const int64_t> accs, const ArgmaxHead& head);

}  // namespace bq
