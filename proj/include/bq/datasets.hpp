#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bq/tensor.hpp"

namespace bq {

// SplitMix64-based generator. Hand-rolled so streams are identical across
// standard libraries; std distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // Box-Muller, one draw per call
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive ends
  double exponential(double rate = 1.0);

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

// Classification set: features (n x d) and integer labels.
struct Dataset {
  Tensor features;  // already scaled into [0,1] per column
  std::vector<int> labels;
  int classes = 0;

  int64_t size() const { return features.rows(); }
};

// Bit-sequence set for the recall task: inputs (n x len) of 0/1; target at
// step t is the input bit at t-1.
struct SequenceDataset {
  Tensor bits;  // n x len, entries in {0,1}
  int64_t length() const { return bits.cols(); }
  int64_t size() const { return bits.rows(); }
};

// Isotropic Gaussian blobs on a circle, features min-max scaled to [0,1].
Dataset make_blobs(int64_t n, int classes, double radius, double stddev, Rng& rng);

// Classic two-spirals, scaled to [0,1].
Dataset make_two_spirals(int64_t n, double noise, Rng& rng);

SequenceDataset make_copy_task(int64_t n, int64_t length, Rng& rng);

// IDX image/label files (big-endian magic 0x00000803 / 0x00000801). Images
// come back as rows scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace bq
