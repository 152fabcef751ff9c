#include "bq/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>

#include "bq/bitplane.hpp"
#include "bq/datasets.hpp"

namespace bq {

namespace {

std::vector<uint8_t> random_codes(int64_t n, int bits, Rng& rng) {
  std::vector<uint8_t> codes(static_cast<size_t>(n));
  for (auto& c : codes) c = static_cast<uint8_t>(rng.uniform_int(0, (1 << bits) - 1));
  return codes;
}

std::vector<int64_t> naive_gemm(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b,
                                int64_t m, int64_t k, int64_t n) {
  std::vector<int64_t> out(static_cast<size_t>(m * n), 0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      const int64_t av = a[static_cast<size_t>(i * k + p)];
      for (int64_t j = 0; j < n; ++j)
        out[static_cast<size_t>(i * n + j)] += av * b[static_cast<size_t>(p * n + j)];
    }
  return out;
}

template <typename F>
double median_ns(F&& fn, int repeats) {
  std::vector<double> times;
  times.reserve(static_cast<size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(
        static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

// Keeps results observable so the calls are not optimized away.
volatile int64_t g_sink = 0;

}  // namespace

std::vector<BenchRow> run_bench(const std::vector<int64_t>& sizes,
                                const std::vector<std::pair<int, int>>& bit_pairs, int repeats,
                                uint64_t seed) {
  repeats = std::max(repeats, 5);
  Rng rng(seed);
  std::vector<BenchRow> rows;
  for (int64_t n : sizes) {
    for (auto [mb, kb] : bit_pairs) {
      const std::vector<uint8_t> a = random_codes(n * n, mb, rng);
      const std::vector<uint8_t> b = random_codes(n * n, kb, rng);
      const BitPlaneMatrix ap = BitPlaneMatrix::pack(a, n, n, mb);
      const BitPlaneMatrix bp = BitPlaneMatrix::pack(b, n, n, kb, PlaneLayout::kColMajor);

      BenchRow row;
      row.size = n;
      row.m_bits = mb;
      row.k_bits = kb;
      row.kernel_ns = median_ns(
          [&] {
            std::vector<int64_t> r = gemm_multibit(ap, bp);
            g_sink = g_sink + r[0];
          },
          repeats);
      row.naive_ns = median_ns(
          [&] {
            std::vector<int64_t> r = naive_gemm(a, b, n, n, n);
            g_sink = g_sink + r[0];
          },
          repeats);
      rows.push_back(row);
    }
  }
  return rows;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "size,M,K,kernel_ns,naive_ns\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%d,%.0f,%.0f\n", static_cast<long long>(r.size),
                  r.m_bits, r.k_bits, r.kernel_ns, r.naive_ns);
    os << buf;
  }
}

}  // namespace bq
