#include "bq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace bq {

CodeHistogram CodeHistogram::from_codes(const QuantizedTensor& q) {
  if (q.codes.empty()) throw PreconditionError("empty code tensor");
  CodeHistogram h;
  h.counts.assign(static_cast<size_t>(q.levels()), 0);
  for (uint8_t c : q.codes) ++h.counts[c];
  h.total = static_cast<int64_t>(q.codes.size());
  return h;
}

void CodeHistogram::write_csv(std::ostream& os, const QuantizedTensor& q) const {
  os << "bin_left,bin_right,count\n";
  const double d = static_cast<double>(q.levels() - 1);
  const double half = (q.convention == Convention::kSymmetric) ? q.scale / d : 0.5 / d;
  char buf[128];
  for (size_t c = 0; c < counts.size(); ++c) {
    const double center = q.dequantize_code(static_cast<uint8_t>(c));
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%lld\n", center - half, center + half,
                  static_cast<long long>(counts[c]));
    os << buf;
  }
}

double entropy_bits(const std::vector<int64_t>& counts) {
  int64_t total = 0;
  for (int64_t c : counts) total += c;
  if (total <= 0) throw PreconditionError("entropy of empty histogram");
  double h = 0.0;
  for (int64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

double effective_bitwidth(const QuantizedTensor& q) {
  return entropy_bits(CodeHistogram::from_codes(q).counts);
}

double mean_effective_bitwidth(const std::vector<QuantizedTensor>& layers) {
  if (layers.empty()) throw PreconditionError("mean_effective_bitwidth of no layers");
  double s = 0.0;
  for (const auto& q : layers) s += effective_bitwidth(q);
  return s / static_cast<double>(layers.size());
}

namespace {
std::vector<double> average_ranks(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("spearman needs paired data");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;  // constant ranks: no trend either way
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace bq
