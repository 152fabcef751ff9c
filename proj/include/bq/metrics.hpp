#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "bq/quant.hpp"

namespace bq {

// Occupancy of the 2^k quantization codes.
struct CodeHistogram {
  std::vector<int64_t> counts;
  int64_t total = 0;

  static CodeHistogram from_codes(const QuantizedTensor& q);
  void write_csv(std::ostream& os, const QuantizedTensor& q) const;
};

// Base-2 entropy of the code distribution, in [0, k]. Empty bins contribute
// zero. Measures how much of the available bitwidth the codes actually use.
double effective_bitwidth(const QuantizedTensor& q);
double entropy_bits(const std::vector<int64_t>& counts);

double mean_effective_bitwidth(const std::vector<QuantizedTensor>& layers);

// Spearman rank correlation (average ranks on ties). Used for the
// bitwidth-utilization vs accuracy trend checks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace bq
