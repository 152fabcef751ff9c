#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bq/bench.hpp"
#include "bq/bitplane.hpp"
#include "oracles.hpp"

using bq::BitPlaneMatrix;
using bq::BitVector;
using bq::PlaneLayout;

TEST_CASE("pack splits codes into binary planes") {
  const std::vector<uint8_t> codes = {3, 2};
  BitPlaneMatrix m = BitPlaneMatrix::pack(codes, 1, 2, 2);
  // plane0 = [1,0], plane1 = [1,1]
  CHECK((m.plane(0)[0] & 0b11) == 0b01);
  CHECK((m.plane(1)[0] & 0b11) == 0b11);
  CHECK(m.unpack() == codes);
}

TEST_CASE("packing zeros yields zero planes") {
  const std::vector<uint8_t> codes(12, 0);
  BitPlaneMatrix m = BitPlaneMatrix::pack(codes, 3, 4, 3);
  for (int p = 0; p < 3; ++p)
    for (uint64_t w : m.plane(p)) CHECK(w == 0);
}

TEST_CASE("pack/unpack round trip on a 13x17 4-bit matrix") {
  bq::Rng rng(50);
  const std::vector<uint8_t> codes = oracle::random_codes(13 * 17, 4, rng);
  for (auto layout : {PlaneLayout::kRowMajor, PlaneLayout::kColMajor}) {
    BitPlaneMatrix m = BitPlaneMatrix::pack(codes, 13, 17, 4, layout);
    CHECK(m.unpack() == codes);
  }
}

TEST_CASE("padding bits beyond the logical length are zero") {
  // 70 columns: 6 bits of the second word are used, the rest must stay clear
  bq::Rng rng(51);
  const std::vector<uint8_t> codes = oracle::random_codes(70, 2, rng);
  BitPlaneMatrix m = BitPlaneMatrix::pack(codes, 1, 70, 2);
  REQUIRE(m.words_per_line() == 2);
  for (int p = 0; p < 2; ++p) CHECK((m.plane(p)[1] & ~((uint64_t{1} << 6) - 1)) == 0);
}

TEST_CASE("code overflow is rejected") {
  const std::vector<uint8_t> codes = {4};
  CHECK_THROWS_AS(BitPlaneMatrix::pack(codes, 1, 1, 2), bq::PreconditionError);
}

TEST_CASE("dot_1bit hand cases") {
  BitVector x = BitVector::pack(std::vector<uint8_t>{1, 0, 1});
  BitVector y = BitVector::pack(std::vector<uint8_t>{1, 1, 1});
  CHECK(bq::dot_1bit(x, y) == 2);
  BitVector z = BitVector::pack(std::vector<uint8_t>{0, 0, 0});
  CHECK(bq::dot_1bit(x, z) == 0);
}

TEST_CASE("dot_1bit equals the integer oracle on random length-1000 pairs") {
  bq::Rng rng(52);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<uint8_t> a = oracle::random_codes(1000, 1, rng);
    const std::vector<uint8_t> b = oracle::random_codes(1000, 1, rng);
    CHECK(bq::dot_1bit(BitVector::pack(a), BitVector::pack(b)) == oracle::dot_codes(a, b));
  }
}

TEST_CASE("dot_1bit length mismatch") {
  BitVector x = BitVector::pack(std::vector<uint8_t>{1, 0});
  BitVector y = BitVector::pack(std::vector<uint8_t>{1});
  CHECK_THROWS_AS(bq::dot_1bit(x, y), bq::DimError);
}

TEST_CASE("dot_multibit scalar case enumerates the plane terms") {
  // x = 3 (bits 11), y = 2 (bits 10): 2^(0+1)*1 + 2^(1+1)*1 = 6
  const std::vector<uint8_t> x = {3};
  const std::vector<uint8_t> y = {2};
  bq::KernelStats stats;
  const int64_t r = bq::dot_multibit(BitPlaneMatrix::pack(x, 1, 1, 2),
                                     BitPlaneMatrix::pack(y, 1, 1, 2), &stats);
  CHECK(r == 6);
  CHECK(stats.plane_passes == 4);
}

TEST_CASE("dot_multibit with M=K=1 reduces to dot_1bit") {
  bq::Rng rng(53);
  const std::vector<uint8_t> a = oracle::random_codes(777, 1, rng);
  const std::vector<uint8_t> b = oracle::random_codes(777, 1, rng);
  const int64_t viaMulti = bq::dot_multibit(BitPlaneMatrix::pack(a, 1, 777, 1),
                                            BitPlaneMatrix::pack(b, 1, 777, 1));
  CHECK(viaMulti == bq::dot_1bit(BitVector::pack(a), BitVector::pack(b)));
}

TEST_CASE("dot_multibit random length-512 M=2 K=3 equals the oracle") {
  bq::Rng rng(54);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<uint8_t> a = oracle::random_codes(512, 2, rng);
    const std::vector<uint8_t> b = oracle::random_codes(512, 3, rng);
    bq::KernelStats stats;
    const int64_t r = bq::dot_multibit(BitPlaneMatrix::pack(a, 1, 512, 2),
                                       BitPlaneMatrix::pack(b, 1, 512, 3), &stats);
    CHECK(r == oracle::dot_codes(a, b));
    CHECK(stats.plane_passes == 6);  // exactly M*K plane passes
  }
}

TEST_CASE("gemm with identity-coded A returns B's codes") {
  const int64_t n = 5;
  std::vector<uint8_t> eye(n * n, 0);
  for (int64_t i = 0; i < n; ++i) eye[static_cast<size_t>(i * n + i)] = 1;
  bq::Rng rng(55);
  const std::vector<uint8_t> b = oracle::random_codes(n * n, 3, rng);
  const std::vector<int64_t> r = bq::gemm_multibit(
      BitPlaneMatrix::pack(eye, n, n, 1), BitPlaneMatrix::pack(b, n, n, 3, PlaneLayout::kColMajor));
  for (int64_t i = 0; i < n * n; ++i) CHECK(r[static_cast<size_t>(i)] == b[static_cast<size_t>(i)]);
}

TEST_CASE("1xk gemm matches dot_multibit") {
  bq::Rng rng(56);
  const std::vector<uint8_t> a = oracle::random_codes(64, 2, rng);
  const std::vector<uint8_t> b = oracle::random_codes(64, 2, rng);
  const auto gemm = bq::gemm_multibit(BitPlaneMatrix::pack(a, 1, 64, 2),
                                      BitPlaneMatrix::pack(b, 64, 1, 2, PlaneLayout::kColMajor));
  const int64_t dot =
      bq::dot_multibit(BitPlaneMatrix::pack(a, 1, 64, 2), BitPlaneMatrix::pack(b, 1, 64, 2));
  REQUIRE(gemm.size() == 1);
  CHECK(gemm[0] == dot);
}

TEST_CASE("gemm 32x64x16 2-bit x 2-bit equals the triple-loop oracle") {
  bq::Rng rng(57);
  const std::vector<uint8_t> a = oracle::random_codes(32 * 64, 2, rng);
  const std::vector<uint8_t> b = oracle::random_codes(64 * 16, 2, rng);
  bq::KernelStats stats;
  const auto got = bq::gemm_multibit(BitPlaneMatrix::pack(a, 32, 64, 2),
                                     BitPlaneMatrix::pack(b, 64, 16, 2, PlaneLayout::kColMajor),
                                     &stats);
  CHECK(got == oracle::gemm_codes(a, b, 32, 64, 16));
  CHECK(stats.plane_passes == static_cast<uint64_t>(32) * 16 * 2 * 2);
}

TEST_CASE("gemm shape and layout errors") {
  bq::Rng rng(58);
  const std::vector<uint8_t> a = oracle::random_codes(6, 1, rng);
  const std::vector<uint8_t> b = oracle::random_codes(6, 1, rng);
  const BitPlaneMatrix ar = BitPlaneMatrix::pack(a, 2, 3, 1);
  const BitPlaneMatrix bc_bad = BitPlaneMatrix::pack(b, 2, 3, 1, PlaneLayout::kColMajor);
  CHECK_THROWS_AS(bq::gemm_multibit(ar, bc_bad), bq::DimError);  // inner dims disagree
  const BitPlaneMatrix br = BitPlaneMatrix::pack(b, 3, 2, 1);
  CHECK_THROWS_AS(bq::gemm_multibit(ar, br), bq::DimError);  // B not column-accessible
}

TEST_CASE("randomized exactness across sizes and bitwidths") {
  bq::Rng rng(59);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = rng.uniform_int(1, 20);
    const auto k = rng.uniform_int(1, 20);
    const auto n = rng.uniform_int(1, 20);
    const int mb = static_cast<int>(rng.uniform_int(1, 8));
    const int kb = static_cast<int>(rng.uniform_int(1, 8));
    const std::vector<uint8_t> a = oracle::random_codes(m * k, mb, rng);
    const std::vector<uint8_t> b = oracle::random_codes(k * n, kb, rng);
    const auto got = bq::gemm_multibit(BitPlaneMatrix::pack(a, m, k, mb),
                                       BitPlaneMatrix::pack(b, k, n, kb, PlaneLayout::kColMajor));
    CHECK(got == oracle::gemm_codes(a, b, m, k, n));
  }
}

TEST_CASE("kernel time grows about linearly in M*K at fixed size") {
  // median-of-runs timing at one size; R^2 of the least-squares fit
  const std::vector<std::pair<int, int>> pairs = {{1, 1}, {1, 2}, {2, 2}, {2, 4}, {4, 4}};
  const auto rows = bq::run_bench({192}, pairs, 7, 7);
  std::vector<double> mk, t;
  for (const auto& r : rows) {
    mk.push_back(static_cast<double>(r.m_bits * r.k_bits));
    t.push_back(r.kernel_ns);
  }
  const auto n = static_cast<double>(mk.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < mk.size(); ++i) {
    sx += mk[i];
    sy += t[i];
    sxx += mk[i] * mk[i];
    sxy += mk[i] * t[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  for (size_t i = 0; i < mk.size(); ++i) {
    const double pred = slope * mk[i] + intercept;
    ss_res += (t[i] - pred) * (t[i] - pred);
    ss_tot += (t[i] - sy / n) * (t[i] - sy / n);
  }
  const double r2 = 1.0 - ss_res / ss_tot;
  MESSAGE("slope=", slope, " ns per plane pass unit, R^2=", r2);
  CHECK(slope > 0.0);
  CHECK(r2 >= 0.9);
}
