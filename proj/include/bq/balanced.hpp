#pragma once

#include <iosfwd>
#include <vector>

#include "bq/autodiff.hpp"
#include "bq/quant.hpp"
#include "bq/tensor.hpp"

namespace bq {

// Piecewise-linear histogram equalization map for one tensor. N = 2^k
// intervals [t_i, t_{i+1}) (last one closed) are sent to the even segments
// [i/N, (i+1)/N] of [0,1] by x -> a_i x + b_i.
//
// When massive ties collapse adjacent thresholds the map degenerates
// (infinite slope); rank_fallback switches the forward pass to rank-based
// assignment, which keeps exact balance, while gradient slopes stay finite
// via kMaxSlope clamping.
struct EqualizerSpec {
  int bitwidth = 1;
  std::vector<double> thresholds;  // N+1, non-decreasing; strictly increasing unless fallback
  std::vector<double> slopes;      // N, positive
  std::vector<double> intercepts;  // N
  bool rank_fallback = false;

  int intervals() const { return 1 << bitwidth; }
  double lo() const { return thresholds.front(); }
  double hi() const { return thresholds.back(); }
};

inline constexpr double kMaxSlope = 1e6;

// Thresholds t_i at the 100*i/N-th percentiles of w (linear interpolation on
// the sorted array at position (i/N)*(n-1)). Requires w.size() >= 2^k.
EqualizerSpec percentile_thresholds(const Tensor& w, int k);

// Which interval x belongs to: half-open [t_i, t_{i+1}), last closed; values
// outside [t_0, t_N] clamp to the nearest end interval.
int interval_of(const EqualizerSpec& spec, double x);

// Forward equalization map; output in [0,1]. In rank_fallback mode the spec
// must have been built from this same tensor.
Tensor equalize_exact(const Tensor& w, const EqualizerSpec& spec);

// Backward rule: grad_in = a_i * grad_out with i the interval of each w
// entry (same membership as the forward pass).
Tensor equalize_backward(const Tensor& grad_out, const EqualizerSpec& spec, const Tensor& w);

// Autodiff node for equalize_exact with the a_i backward rule.
NodeId equalize_node(Graph& g, NodeId x, const EqualizerSpec& spec);

enum class ThresholdMode { kMean, kMedian };

struct SplitStat {
  int64_t count_less = 0;  // sum of M^l
  int64_t count_geq = 0;   // sum of M^g
  double threshold = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // population
};

// Record of one recursive-equalization run: every internal split plus the
// leaf interval each element landed in.
struct RecursiveTrace {
  std::vector<SplitStat> splits;
  std::vector<int> leaf_index;      // per element, 0..2^k-1
  std::vector<int64_t> leaf_counts;  // length 2^k
  std::vector<int> visited_leaves;   // interval index of each leaf reached
  bool had_empty_split = false;
  double gamma = 1.0;  // max split imbalance; +inf when a side was empty
};

// Histogram equalization by recursive partitioning: depth-k recursion,
// threshold = mean or median of the working set, strictly-less goes left,
// leaves apply the min-max affine map, halves recombine as
// W_l/2 + (W_g/2 + 1/2) ∘ M_g. Output in [0,1].
Tensor recursive_equalize(const Tensor& w, int k, ThresholdMode mode,
                          RecursiveTrace* trace = nullptr);

enum class EqualizeMode { kExactPercentile, kRecursiveMean, kRecursiveMedian };

struct BalancedQuantizeResult {
  QuantizedTensor quantized;  // symmetric codes, scale = max|w|
  Tensor dequantized;
  Tensor equalized;  // W_e, for diagnostics
  EqualizerSpec spec;      // exact-percentile mode only
  RecursiveTrace trace;    // recursive modes only
};

// Full pipeline: scale = max|W|; W_e = equalize; W_f = round_to_zero-based
// fixed-point snap to the 2^k grid on [-1/2, 1/2]; W_q = 2*scale*W_f.
BalancedQuantizeResult balanced_quantize(const Tensor& w, int k, EqualizeMode mode);

struct BalanceReport {
  double gamma = 1.0;  // +inf when some split had an empty side
  double ratio = 1.0;  // max/min count over populated leaf codes
  bool holds = false;  // ratio <= gamma^(2k), vacuous (with empty_codes reported) at gamma=inf
  bool leaves_distinct = false;
  bool codes_consistent = false;  // emitted codes lie in {leaf, leaf-1} per element
  int64_t empty_codes = 0;        // leaf codes with zero members
  std::vector<int64_t> leaf_code_counts;
  std::vector<int64_t> raw_code_counts;  // counts of the emitted rounded codes
};

// Empirical check of the recursive-partitioning balance bound. The per-code
// counting follows the leaf partition (the quantity the bound controls); the
// emitted rounded codes are reported alongside, since each interior leaf's
// minimum lands exactly on a dyadic boundary and rounds into the code below.
BalanceReport verify_balance_bound(const Tensor& w, int k, EqualizeMode mode);

// STE node over the whole balanced quantizer (identity Jacobian).
NodeId ste_balanced_quantize(Graph& g, NodeId x, int k, EqualizeMode mode);

// Equal-width histogram rows "bin_left,bin_right,count".
void write_histogram_csv(std::ostream& os, const Tensor& values, int bins);

}  // namespace bq
