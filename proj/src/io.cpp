#include "bq/io.hpp"

#include <cstring>
#include <fstream>

namespace bq {
namespace wire {

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

uint32_t get_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw IoError("truncated stream (u32)");
  return v;
}

uint64_t get_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  if (!is) throw IoError("truncated stream (u64)");
  return v;
}

double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  if (!is) throw IoError("truncated stream (f64)");
  return v;
}

void get_bytes(std::istream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw IoError("truncated stream (payload)");
}

void expect_magic(std::istream& is, const char* magic, const std::string& what) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0) throw IoError("bad magic: not a " + what + " file");
}

}  // namespace wire

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write("BQTN", 4);
  wire::put_u32(os, 1);
  wire::put_u32(os, static_cast<uint32_t>(t.rank()));
  for (int64_t e : t.shape()) wire::put_u64(os, static_cast<uint64_t>(e));
  wire::put_bytes(os, t.data().data(), t.data().size() * sizeof(double));
  if (!os) throw IoError("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  wire::expect_magic(is, "BQTN", "tensor");
  if (wire::get_u32(is) != 1) throw IoError("unsupported tensor file version");
  const uint32_t rank = wire::get_u32(is);
  if (rank == 0 || rank > 8) throw IoError("bad tensor rank");
  std::vector<int64_t> shape(rank);
  int64_t n = 1;
  for (auto& e : shape) {
    e = static_cast<int64_t>(wire::get_u64(is));
    n *= e;
  }
  std::vector<double> data(static_cast<size_t>(n));
  wire::get_bytes(is, data.data(), data.size() * sizeof(double));
  return Tensor(std::move(shape), std::move(data));
}

void save_quantized(const std::string& path, const QuantizedTensor& q) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write("BQQT", 4);
  wire::put_u32(os, 1);
  const uint8_t bw = static_cast<uint8_t>(q.bitwidth);
  const uint8_t conv = static_cast<uint8_t>(q.convention);
  wire::put_bytes(os, &bw, 1);
  wire::put_bytes(os, &conv, 1);
  wire::put_f64(os, q.scale);
  wire::put_u32(os, static_cast<uint32_t>(q.shape.size()));
  for (int64_t e : q.shape) wire::put_u64(os, static_cast<uint64_t>(e));
  wire::put_bytes(os, q.codes.data(), q.codes.size());
  if (!os) throw IoError("write failed: " + path);
}

QuantizedTensor load_quantized(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  wire::expect_magic(is, "BQQT", "quantized tensor");
  if (wire::get_u32(is) != 1) throw IoError("unsupported quantized file version");
  QuantizedTensor q;
  uint8_t bw = 0, conv = 0;
  wire::get_bytes(is, &bw, 1);
  wire::get_bytes(is, &conv, 1);
  q.bitwidth = bw;
  check_bitwidth(q.bitwidth);
  if (conv > 1) throw IoError("bad convention flag");
  q.convention = static_cast<Convention>(conv);
  q.scale = wire::get_f64(is);
  const uint32_t rank = wire::get_u32(is);
  if (rank == 0 || rank > 8) throw IoError("bad quantized tensor rank");
  q.shape.resize(rank);
  int64_t n = 1;
  for (auto& e : q.shape) {
    e = static_cast<int64_t>(wire::get_u64(is));
    n *= e;
  }
  q.codes.resize(static_cast<size_t>(n));
  wire::get_bytes(is, q.codes.data(), q.codes.size());
  const uint32_t limit = uint32_t{1} << q.bitwidth;
  for (uint8_t c : q.codes)
    if (c >= limit) throw IoError("code exceeds declared bitwidth");
  return q;
}

}  // namespace bq
