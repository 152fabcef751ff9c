#include "bq/balanced.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

namespace bq {

namespace {

double interpolate_sorted(const std::vector<double>& sorted, double pos) {
  const auto n = static_cast<int64_t>(sorted.size());
  const auto lo = static_cast<int64_t>(std::floor(pos));
  if (lo >= n - 1) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[static_cast<size_t>(lo)] +
         frac * (sorted[static_cast<size_t>(lo + 1)] - sorted[static_cast<size_t>(lo)]);
}

// Stable ranks: ties broken by flat index.
std::vector<int64_t> stable_ranks(const Tensor& w) {
  const int64_t n = w.size();
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t a, int64_t b) { return w[a] < w[b]; });
  std::vector<int64_t> rank(static_cast<size_t>(n));
  for (int64_t r = 0; r < n; ++r) rank[static_cast<size_t>(order[static_cast<size_t>(r)])] = r;
  return rank;
}

}  // namespace

EqualizerSpec percentile_thresholds(const Tensor& w, int k) {
  check_bitwidth(k);
  const int n_intervals = 1 << k;
  const int64_t n = w.size();
  if (n < n_intervals)
    throw PreconditionError("percentile_thresholds needs at least 2^k elements, got " +
                            std::to_string(n));

  std::vector<double> sorted(w.data().begin(), w.data().end());
  std::sort(sorted.begin(), sorted.end());

  EqualizerSpec spec;
  spec.bitwidth = k;
  spec.thresholds.resize(static_cast<size_t>(n_intervals) + 1);
  spec.thresholds.front() = sorted.front();
  spec.thresholds.back() = sorted.back();
  for (int i = 1; i < n_intervals; ++i) {
    const double pos = (static_cast<double>(i) / n_intervals) * static_cast<double>(n - 1);
    spec.thresholds[static_cast<size_t>(i)] = interpolate_sorted(sorted, pos);
  }

  spec.slopes.resize(static_cast<size_t>(n_intervals));
  spec.intercepts.resize(static_cast<size_t>(n_intervals));
  const double seg = 1.0 / n_intervals;
  for (int i = 0; i < n_intervals; ++i) {
    const double width = spec.thresholds[static_cast<size_t>(i) + 1] -
                         spec.thresholds[static_cast<size_t>(i)];
    if (width <= 0.0) spec.rank_fallback = true;
    const double a = width > 0.0 ? std::min(seg / width, kMaxSlope) : kMaxSlope;
    spec.slopes[static_cast<size_t>(i)] = a;
    spec.intercepts[static_cast<size_t>(i)] =
        static_cast<double>(i) * seg - a * spec.thresholds[static_cast<size_t>(i)];
  }
  return spec;
}

int interval_of(const EqualizerSpec& spec, double x) {
  const auto& t = spec.thresholds;
  if (x <= t.front()) return 0;
  if (x >= t.back()) return spec.intervals() - 1;
  const auto it = std::upper_bound(t.begin(), t.end(), x);
  const auto i = static_cast<int>(it - t.begin()) - 1;
  return std::min(i, spec.intervals() - 1);
}

Tensor equalize_exact(const Tensor& w, const EqualizerSpec& spec) {
  Tensor out(w.shape());
  if (spec.rank_fallback) {
    // Degenerate thresholds: assign by rank so every segment stays balanced.
    const int64_t n = w.size();
    const std::vector<int64_t> rank = stable_ranks(w);
    for (int64_t e = 0; e < n; ++e)
      out[e] = (static_cast<double>(rank[static_cast<size_t>(e)]) + 0.5) / static_cast<double>(n);
    return out;
  }
  for (int64_t e = 0; e < w.size(); ++e) {
    const double x = std::clamp(w[e], spec.lo(), spec.hi());
    const int i = interval_of(spec, x);
    const double y = spec.slopes[static_cast<size_t>(i)] * x +
                     spec.intercepts[static_cast<size_t>(i)];
    out[e] = std::clamp(y, 0.0, 1.0);
  }
  return out;
}

Tensor equalize_backward(const Tensor& grad_out, const EqualizerSpec& spec, const Tensor& w) {
  if (!grad_out.same_shape(w)) throw DimError("equalize_backward: shape mismatch");
  Tensor out(w.shape());
  if (spec.rank_fallback) {
    // Same membership as the rank-based forward; slope from the (clamped)
    // interpolated thresholds of that segment.
    const int64_t n = w.size();
    const int n_intervals = spec.intervals();
    const std::vector<int64_t> rank = stable_ranks(w);
    for (int64_t e = 0; e < n; ++e) {
      const double xe = (static_cast<double>(rank[static_cast<size_t>(e)]) + 0.5) /
                        static_cast<double>(n);
      const int i = std::min(n_intervals - 1, static_cast<int>(xe * n_intervals));
      out[e] = spec.slopes[static_cast<size_t>(i)] * grad_out[e];
    }
    return out;
  }
  for (int64_t e = 0; e < w.size(); ++e) {
    const double x = std::clamp(w[e], spec.lo(), spec.hi());
    out[e] = spec.slopes[static_cast<size_t>(interval_of(spec, x))] * grad_out[e];
  }
  return out;
}

NodeId equalize_node(Graph& g, NodeId x, const EqualizerSpec& spec) {
  Tensor fwd = equalize_exact(g.value(x), spec);
  Tensor saved_input = g.value(x);
  return g.custom(
      std::move(fwd), {x},
      [x, spec, saved_input](Graph& gr, NodeId self) {
        gr.accumulate_grad(x, equalize_backward(gr.grad(self), spec, saved_input));
      },
      "equalize");
}

namespace {

struct RecContext {
  const Tensor* w;
  ThresholdMode mode;
  RecursiveTrace* trace;
};

// One node of the recursion. mask marks the working set; level counts the
// remaining splits; base_interval is the interval index accumulated from the
// path (right branch at depth d contributes 2^(level-1) of its subtree).
std::vector<double> recurse(RecContext& ctx, const std::vector<uint8_t>& mask, int level,
                            int base_interval) {
  const Tensor& w = *ctx.w;
  const auto n = static_cast<int64_t>(mask.size());

  std::vector<double> members;
  members.reserve(static_cast<size_t>(n));
  for (int64_t e = 0; e < n; ++e)
    if (mask[static_cast<size_t>(e)]) members.push_back(w[e]);

  std::vector<double> out(static_cast<size_t>(n), 0.0);
  if (members.empty()) return out;  // empty working set contributes nothing

  if (level == 0) {
    const auto [mn_it, mx_it] = std::minmax_element(members.begin(), members.end());
    const double mn = *mn_it, mx = *mx_it;
    for (int64_t e = 0; e < n; ++e) {
      if (!mask[static_cast<size_t>(e)]) continue;
      // Constant working set: the affine map is undefined, park at midpoint.
      out[static_cast<size_t>(e)] = (mx > mn) ? (w[e] - mn) / (mx - mn) : 0.5;
      if (ctx.trace) {
        ctx.trace->leaf_index[static_cast<size_t>(e)] = base_interval;
        ++ctx.trace->leaf_counts[static_cast<size_t>(base_interval)];
      }
    }
    if (ctx.trace) ctx.trace->visited_leaves.push_back(base_interval);
    return out;
  }

  const double mean =
      std::accumulate(members.begin(), members.end(), 0.0) / static_cast<double>(members.size());
  double median;
  {
    std::vector<double> tmp = members;
    const size_t m = tmp.size();
    std::nth_element(tmp.begin(), tmp.begin() + m / 2, tmp.end());
    median = tmp[m / 2];
    if (m % 2 == 0) {
      std::nth_element(tmp.begin(), tmp.begin() + (m / 2 - 1), tmp.end());
      median = 0.5 * (median + tmp[m / 2 - 1]);
    }
  }
  const double threshold = (ctx.mode == ThresholdMode::kMean) ? mean : median;

  std::vector<uint8_t> mask_l(static_cast<size_t>(n), 0), mask_g(static_cast<size_t>(n), 0);
  int64_t cl = 0, cg = 0;
  for (int64_t e = 0; e < n; ++e) {
    if (!mask[static_cast<size_t>(e)]) continue;
    if (w[e] < threshold) {
      mask_l[static_cast<size_t>(e)] = 1;
      ++cl;
    } else {
      mask_g[static_cast<size_t>(e)] = 1;
      ++cg;
    }
  }

  if (ctx.trace) {
    double var = 0.0;
    for (double v : members) var += (v - mean) * (v - mean);
    var /= static_cast<double>(members.size());
    ctx.trace->splits.push_back(
        {cl, cg, threshold, mean, median, std::sqrt(var)});
    if (cl == 0 || cg == 0) {
      ctx.trace->had_empty_split = true;
      ctx.trace->gamma = std::numeric_limits<double>::infinity();
    } else {
      const double r = std::max(static_cast<double>(cl) / static_cast<double>(cg),
                                static_cast<double>(cg) / static_cast<double>(cl));
      ctx.trace->gamma = std::max(ctx.trace->gamma, r);
    }
  }

  const std::vector<double> out_l = recurse(ctx, mask_l, level - 1, base_interval);
  const std::vector<double> out_g = recurse(ctx, mask_g, level - 1, base_interval + (1 << (level - 1)));

  for (int64_t e = 0; e < n; ++e) {
    const auto ue = static_cast<size_t>(e);
    out[ue] = 0.5 * out_l[ue] + (0.5 * out_g[ue] + 0.5) * (mask_g[ue] ? 1.0 : 0.0);
  }
  return out;
}

}  // namespace

Tensor recursive_equalize(const Tensor& w, int k, ThresholdMode mode, RecursiveTrace* trace) {
  check_bitwidth(k);
  const int64_t n = w.size();
  if (n < (1 << k))
    throw PreconditionError("recursive_equalize needs at least 2^k elements, got " +
                            std::to_string(n));
  if (trace) {
    trace->splits.clear();
    trace->leaf_index.assign(static_cast<size_t>(n), -1);
    trace->leaf_counts.assign(static_cast<size_t>(1) << k, 0);
    trace->visited_leaves.clear();
    trace->had_empty_split = false;
    trace->gamma = 1.0;
  }
  RecContext ctx{&w, mode, trace};
  std::vector<uint8_t> all(static_cast<size_t>(n), 1);
  std::vector<double> out = recurse(ctx, all, k, 0);
  return Tensor(w.shape(), std::move(out));
}

BalancedQuantizeResult balanced_quantize(const Tensor& w, int k, EqualizeMode mode) {
  check_bitwidth(k);
  BalancedQuantizeResult res;
  const double scale = max_abs(w);

  switch (mode) {
    case EqualizeMode::kExactPercentile:
      res.spec = percentile_thresholds(w, k);
      res.equalized = equalize_exact(w, res.spec);
      break;
    case EqualizeMode::kRecursiveMean:
      res.equalized = recursive_equalize(w, k, ThresholdMode::kMean, &res.trace);
      break;
    case EqualizeMode::kRecursiveMedian:
      res.equalized = recursive_equalize(w, k, ThresholdMode::kMedian, &res.trace);
      break;
  }

  const double two_k = static_cast<double>(1 << k);
  res.quantized.shape = w.shape();
  res.quantized.bitwidth = k;
  res.quantized.convention = Convention::kSymmetric;
  res.quantized.scale = scale;
  res.quantized.codes.resize(static_cast<size_t>(w.size()));
  for (int64_t e = 0; e < w.size(); ++e) {
    // W_f = round_to_zero(2^k W_e - 1/2)/(2^k-1) - 1/2; the code is the
    // rounded integer, the dequantized value is 2*scale*W_f.
    const double code = round_to_zero(two_k * res.equalized[e] - 0.5);
    res.quantized.codes[static_cast<size_t>(e)] = static_cast<uint8_t>(code);
  }
  res.dequantized = res.quantized.dequantize();
  return res;
}

BalanceReport verify_balance_bound(const Tensor& w, int k, EqualizeMode mode) {
  if (mode == EqualizeMode::kExactPercentile)
    throw PreconditionError("verify_balance_bound applies to the recursive modes");
  BalancedQuantizeResult res = balanced_quantize(w, k, mode);
  const int n_codes = 1 << k;

  BalanceReport rep;
  rep.gamma = res.trace.gamma;
  rep.leaf_code_counts = res.trace.leaf_counts;
  rep.raw_code_counts.assign(static_cast<size_t>(n_codes), 0);
  for (uint8_t c : res.quantized.codes) ++rep.raw_code_counts[c];

  // Appendix-style uniqueness of leaf-to-interval assignment.
  std::vector<int> seen(static_cast<size_t>(n_codes), 0);
  rep.leaves_distinct = true;
  for (int leaf : res.trace.visited_leaves) {
    if (leaf < 0 || leaf >= n_codes || seen[static_cast<size_t>(leaf)]) {
      rep.leaves_distinct = false;
      break;
    }
    seen[static_cast<size_t>(leaf)] = 1;
  }

  // The emitted code of every element is its leaf interval, except that an
  // element sitting exactly on the interval's dyadic left edge rounds down.
  rep.codes_consistent = true;
  for (int64_t e = 0; e < w.size(); ++e) {
    const int leaf = res.trace.leaf_index[static_cast<size_t>(e)];
    const int code = res.quantized.codes[static_cast<size_t>(e)];
    if (code != leaf && code != leaf - 1) {
      rep.codes_consistent = false;
      break;
    }
  }

  int64_t max_count = 0;
  int64_t min_count = std::numeric_limits<int64_t>::max();
  for (int64_t c : rep.leaf_code_counts) {
    if (c == 0) {
      ++rep.empty_codes;
      continue;
    }
    max_count = std::max(max_count, c);
    min_count = std::min(min_count, c);
  }
  rep.ratio = (min_count > 0 && max_count > 0)
                  ? static_cast<double>(max_count) / static_cast<double>(min_count)
                  : 1.0;
  const double bound = std::isinf(rep.gamma)
                           ? std::numeric_limits<double>::infinity()
                           : std::pow(rep.gamma, 2.0 * k);
  rep.holds = rep.ratio <= bound && rep.leaves_distinct;
  return rep;
}

NodeId ste_balanced_quantize(Graph& g, NodeId x, int k, EqualizeMode mode) {
  BalancedQuantizeResult res = balanced_quantize(g.value(x), k, mode);
  return ste_custom(g, x, std::move(res.dequantized), "ste_balanced_quantize");
}

void write_histogram_csv(std::ostream& os, const Tensor& values, int bins) {
  if (bins < 1) throw PreconditionError("histogram needs at least one bin");
  double mn = values[0], mx = values[0];
  for (double v : values.data()) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  if (mx <= mn) mx = mn + 1.0;
  std::vector<int64_t> counts(static_cast<size_t>(bins), 0);
  const double width = (mx - mn) / bins;
  for (double v : values.data()) {
    auto b = static_cast<int64_t>((v - mn) / width);
    b = std::clamp<int64_t>(b, 0, bins - 1);
    ++counts[static_cast<size_t>(b)];
  }
  os << "bin_left,bin_right,count\n";
  char buf[128];
  for (int b = 0; b < bins; ++b) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%lld\n", mn + b * width, mn + (b + 1) * width,
                  static_cast<long long>(counts[static_cast<size_t>(b)]));
    os << buf;
  }
}

}  // namespace bq
