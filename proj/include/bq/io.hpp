#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bq/quant.hpp"
#include "bq/tensor.hpp"

namespace bq {

// Binary tensor file: "BQTN", u32 version, u32 rank, u64 dims..., f64 data.
// All fields little-endian.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// Quantized tensor file: "BQQT", u32 version, u8 bitwidth, u8 convention,
// f64 scale, u32 rank, u64 dims..., u8 codes.
void save_quantized(const std::string& path, const QuantizedTensor& q);
QuantizedTensor load_quantized(const std::string& path);

// Raw little-endian stream helpers shared by the file formats.
namespace wire {
void put_u32(std::ostream& os, uint32_t v);
void put_u64(std::ostream& os, uint64_t v);
void put_f64(std::ostream& os, double v);
void put_bytes(std::ostream& os, const void* p, size_t n);
uint32_t get_u32(std::istream& is);
uint64_t get_u64(std::istream& is);
double get_f64(std::istream& is);
void get_bytes(std::istream& is, void* p, size_t n);
void expect_magic(std::istream& is, const char* magic, const std::string& what);
}  // namespace wire

}  // namespace bq
