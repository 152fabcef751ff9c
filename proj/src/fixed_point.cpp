#include "bq/fixed_point.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bq/quant.hpp"

namespace bq {

namespace {
constexpr int64_t kNever = std::numeric_limits<int64_t>::max();
constexpr int64_t kAlways = std::numeric_limits<int64_t>::min();

int64_t floor_to_i64(double t) {
  const double f = std::floor(t);
  if (f >= 9.2e18) return kNever;
  if (f <= -9.2e18) return kAlways;
  return static_cast<int64_t>(f);
}

int64_t ceil_to_i64(double t) {
  const double c = std::ceil(t);
  if (c >= 9.2e18) return kNever;
  if (c <= -9.2e18) return kAlways;
  return static_cast<int64_t>(c);
}
}  // namespace

MonotoneActivation sigmoid_activation() {
  return {[](double h) { return std::log(h / (1.0 - h)); }, true, 0.0, 1.0};
}

MonotoneActivation identity_activation() {
  return {[](double h) { return h; }, true, -std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
}

MonotoneActivation activation_spec(Activation a) {
  switch (a) {
    case Activation::kSigmoid:
      return sigmoid_activation();
    case Activation::kIdentity:
      return identity_activation();
  }
  throw ContractError("unknown activation id");
}

std::vector<double> activation_grid_midpoints(int activation_bits) {
  check_bitwidth(activation_bits);
  const int d = (1 << activation_bits) - 1;
  std::vector<double> h(static_cast<size_t>(d));
  for (int j = 1; j <= d; ++j)
    h[static_cast<size_t>(j - 1)] = static_cast<double>(2 * j - 1) / (2.0 * d);
  return h;
}

uint8_t code_from_unit(double v, int activation_bits) {
  const int d = (1 << activation_bits) - 1;
  int code = 0;
  for (int j = 1; j <= d; ++j)
    if (v > static_cast<double>(2 * j - 1) / (2.0 * d)) ++code;
  return static_cast<uint8_t>(code);
}

uint8_t ThresholdTable::code_for(int64_t acc) const {
  if (constant) return constant_code;
  int code = 0;
  if (ascending) {
    for (int64_t t : thresholds)
      if (acc > t) ++code;
  } else {
    for (int64_t t : thresholds)
      if (acc < t) ++code;
  }
  return static_cast<uint8_t>(code);
}

ThresholdTable precompute_thresholds(double alpha, double b, const MonotoneActivation& sigma,
                                     int activation_bits, int scale_exponent) {
  check_bitwidth(activation_bits);
  ThresholdTable table;
  table.scale_exponent = scale_exponent;
  table.alpha = alpha;
  table.bias = b;

  const std::vector<double> grid = activation_grid_midpoints(activation_bits);

  if (alpha == 0.0) {
    // Constant pre-activation: every input yields Q_A(sigma(b)). sigma is
    // only known through its inverse, so count the grid points sigma(b)
    // clears by comparing in the pre-activation domain.
    table.constant = true;
    int code = 0;
    for (double h : grid) {
      if (h <= sigma.range_lo) {
        ++code;
        continue;
      }
      if (h >= sigma.range_hi) continue;
      const double x = sigma.inverse(h);
      if (sigma.increasing ? (b > x) : (b < x)) ++code;
    }
    table.constant_code = static_cast<uint8_t>(code);
    return table;
  }

  const bool ascending = sigma.increasing == (alpha > 0.0);
  table.ascending = ascending;
  table.thresholds.reserve(grid.size());
  for (double h : grid) {
    int64_t t;
    if (h <= sigma.range_lo) {
      // sigma output always clears this grid point
      t = ascending ? kAlways : kNever;
    } else if (h >= sigma.range_hi) {
      t = ascending ? kNever : kAlways;
    } else {
      const double x = (sigma.inverse(h) - b) / alpha;
      t = ascending ? floor_to_i64(x) : ceil_to_i64(x);
    }
    table.thresholds.push_back(t);
  }
  for (size_t j = 1; j < table.thresholds.size(); ++j) {
    const bool ok = ascending ? table.thresholds[j] >= table.thresholds[j - 1]
                              : table.thresholds[j] <= table.thresholds[j - 1];
    if (!ok) throw ContractError("activation is not monotone over the decision grid");
  }
  return table;
}

LayerFixedPlan plan_layer(double w_scale, int w_bits, int x_bits, const Tensor& biases,
                          Activation act, int activation_bits) {
  check_bitwidth(w_bits);
  check_bitwidth(x_bits);
  const double dw = static_cast<double>((1 << w_bits) - 1);
  const double dx = static_cast<double>((1 << x_bits) - 1);
  const double alpha = w_scale / (dw * dx);
  const MonotoneActivation sigma = activation_spec(act);
  LayerFixedPlan plan;
  plan.weight_bits = w_bits;
  plan.input_bits = x_bits;
  plan.activation_bits = activation_bits;
  plan.units.reserve(static_cast<size_t>(biases.size()));
  for (int64_t u = 0; u < biases.size(); ++u)
    plan.units.push_back(precompute_thresholds(alpha, biases[u], sigma, activation_bits));
  return plan;
}

std::vector<int64_t> layer_accumulators(std::span<const uint8_t> x_codes, int64_t batch,
                                        int64_t in, std::span<const uint8_t> w_codes, int64_t out,
                                        int w_bits, int x_bits) {
  const BitPlaneMatrix xp = BitPlaneMatrix::pack(x_codes, batch, in, x_bits);
  const BitPlaneMatrix wp = BitPlaneMatrix::pack(w_codes, in, out, w_bits, PlaneLayout::kColMajor);
  std::vector<int64_t> s1 = gemm_multibit(xp, wp);

  const int64_t dw = (int64_t{1} << w_bits) - 1;
  std::vector<int64_t> row_sum(static_cast<size_t>(batch), 0);
  for (int64_t i = 0; i < batch; ++i)
    for (int64_t j = 0; j < in; ++j)
      row_sum[static_cast<size_t>(i)] += x_codes[static_cast<size_t>(i * in + j)];

  // acc = sum_j (2*w - Dw) * x = 2*S1 - Dw * sum_j(x)
  std::vector<int64_t> acc(static_cast<size_t>(batch * out));
  for (int64_t i = 0; i < batch; ++i)
    for (int64_t o = 0; o < out; ++o)
      acc[static_cast<size_t>(i * out + o)] =
          2 * s1[static_cast<size_t>(i * out + o)] - dw * row_sum[static_cast<size_t>(i)];
  return acc;
}

std::vector<uint8_t> eval_layer_fixed(std::span<const uint8_t> x_codes, int64_t batch, int64_t in,
                                      std::span<const uint8_t> w_codes, int64_t out,
                                      const LayerFixedPlan& plan) {
  if (static_cast<int64_t>(plan.units.size()) != out)
    throw ContractError("threshold plan does not match layer width");
  std::vector<int64_t> acc =
      layer_accumulators(x_codes, batch, in, w_codes, out, plan.weight_bits, plan.input_bits);
  std::vector<uint8_t> codes(static_cast<size_t>(batch * out));
  for (int64_t i = 0; i < batch; ++i)
    for (int64_t o = 0; o < out; ++o)
      codes[static_cast<size_t>(i * out + o)] =
          plan.units[static_cast<size_t>(o)].code_for(acc[static_cast<size_t>(i * out + o)]);
  return codes;
}

std::vector<uint8_t> reference_layer_codes(std::span<const uint8_t> x_codes, int64_t batch,
                                           int64_t in, std::span<const uint8_t> w_codes,
                                           int64_t out, double w_scale, int w_bits, int x_bits,
                                           const Tensor& biases, Activation act,
                                           int activation_bits) {
  if (biases.size() != out) throw DimError("reference_layer_codes: bias extent mismatch");
  const double dw = static_cast<double>((1 << w_bits) - 1);
  const double dx = static_cast<double>((1 << x_bits) - 1);
  std::vector<uint8_t> codes(static_cast<size_t>(batch * out));
  for (int64_t i = 0; i < batch; ++i) {
    for (int64_t o = 0; o < out; ++o) {
      double z = 0.0;
      for (int64_t j = 0; j < in; ++j) {
        const double wv =
            w_scale *
            ((2.0 * static_cast<double>(w_codes[static_cast<size_t>(j * out + o)]) - dw) / dw);
        const double xv = static_cast<double>(x_codes[static_cast<size_t>(i * in + j)]) / dx;
        z += wv * xv;
      }
      z += biases[o];
      const double v = (act == Activation::kSigmoid) ? sigmoid_scalar(z) : z;
      codes[static_cast<size_t>(i * out + o)] = code_from_unit(v, activation_bits);
    }
  }
  return codes;
}

ArgmaxHead plan_argmax_head(double alpha, const Tensor& biases) {
  if (alpha < 0.0) throw ContractError("argmax head requires nonnegative alpha");
  ArgmaxHead head;
  head.classes = static_cast<int>(biases.size());
  if (alpha == 0.0) {
    head.constant = true;
    int best = 0;
    for (int c = 1; c < head.classes; ++c)
      if (biases[c] > biases[best]) best = c;
    head.constant_winner = best;
    return head;
  }
  head.tau.assign(static_cast<size_t>(head.classes) * head.classes, 0);
  for (int i = 0; i < head.classes; ++i)
    for (int c = 0; c < head.classes; ++c)
      head.tau[static_cast<size_t>(i) * head.classes + c] = floor_to_i64((biases[i] - biases[c]) / alpha);
  return head;
}

int eval_argmax_fixed(std::span<const int64_t> accs, const ArgmaxHead& head) {
  if (static_cast<int>(accs.size()) != head.classes)
    throw ContractError("argmax head class count mismatch");
  if (head.constant) return head.constant_winner;
  int best = 0;
  for (int c = 1; c < head.classes; ++c) {
    const int64_t tau = head.tau[static_cast<size_t>(best) * head.classes + c];
    if (accs[static_cast<size_t>(c)] - accs[static_cast<size_t>(best)] > tau) best = c;
  }
  return best;
}

}  // namespace bq
