#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

namespace bq {

struct BenchRow {
  int64_t size = 0;  // square matrices size x size
  int m_bits = 1;
  int k_bits = 1;
  double kernel_ns = 0.0;  // median ns per GEMM call
  double naive_ns = 0.0;
};

// Times gemm_multibit against a naive int64 triple loop on the same codes.
// Median of `repeats` runs (at least 5); no cross-machine claims.
std::vector<BenchRow> run_bench(const std::vector<int64_t>& sizes,
                                const std::vector<std::pair<int, int>>& bit_pairs, int repeats,
                                uint64_t seed);

// CSV rows "size,M,K,kernel_ns,naive_ns".
void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);

}  // namespace bq
