#include "bq/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace bq {

uint64_t Rng::next_u64() {
  // SplitMix64
  state_ += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  const auto span = static_cast<uint64_t>(hi - lo + 1);
  return lo + static_cast<int64_t>(next_u64() % span);
}

double Rng::exponential(double rate) {
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return -std::log(u) / rate;
}

namespace {
void minmax_scale_columns(Tensor& x) {
  const int64_t n = x.rows(), d = x.cols();
  for (int64_t j = 0; j < d; ++j) {
    double mn = x(0, j), mx = x(0, j);
    for (int64_t i = 1; i < n; ++i) {
      mn = std::min(mn, x(i, j));
      mx = std::max(mx, x(i, j));
    }
    const double span = (mx > mn) ? mx - mn : 1.0;
    for (int64_t i = 0; i < n; ++i) x(i, j) = (x(i, j) - mn) / span;
  }
}
}  // namespace

Dataset make_blobs(int64_t n, int classes, double radius, double stddev, Rng& rng) {
  if (classes < 2) throw PreconditionError("make_blobs needs >= 2 classes");
  Dataset ds;
  ds.classes = classes;
  ds.features = Tensor({n, 2});
  ds.labels.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(rng.uniform_int(0, classes - 1));
    const double angle = 2.0 * 3.14159265358979323846 * c / classes;
    ds.features(i, 0) = radius * std::cos(angle) + stddev * rng.normal();
    ds.features(i, 1) = radius * std::sin(angle) + stddev * rng.normal();
    ds.labels[static_cast<size_t>(i)] = c;
  }
  minmax_scale_columns(ds.features);
  return ds;
}

Dataset make_two_spirals(int64_t n, double noise, Rng& rng) {
  Dataset ds;
  ds.classes = 2;
  ds.features = Tensor({n, 2});
  ds.labels.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(rng.uniform_int(0, 1));
    const double t = rng.uniform(0.25, 1.0) * 3.0 * 3.14159265358979323846;
    const double sign = c == 0 ? 1.0 : -1.0;
    ds.features(i, 0) = sign * t * std::cos(t) + noise * rng.normal();
    ds.features(i, 1) = sign * t * std::sin(t) + noise * rng.normal();
    ds.labels[static_cast<size_t>(i)] = c;
  }
  minmax_scale_columns(ds.features);
  return ds;
}

SequenceDataset make_copy_task(int64_t n, int64_t length, Rng& rng) {
  SequenceDataset ds;
  ds.bits = Tensor({n, length});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t t = 0; t < length; ++t) ds.bits(i, t) = (rng.next_u64() & 1) ? 1.0 : 0.0;
  return ds;
}

namespace {
uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated IDX header in " + path);
  return (uint32_t{b[0]} << 24) | (uint32_t{b[1]} << 16) | (uint32_t{b[2]} << 8) | uint32_t{b[3]};
}
}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path);
  if (read_be32(img, images_path) != 0x00000803u)
    throw IoError("bad IDX image magic in " + images_path);
  const uint32_t count = read_be32(img, images_path);
  const uint32_t rows = read_be32(img, images_path);
  const uint32_t cols = read_be32(img, images_path);
  const int64_t dim = static_cast<int64_t>(rows) * cols;

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path);
  if (read_be32(lab, labels_path) != 0x00000801u)
    throw IoError("bad IDX label magic in " + labels_path);
  const uint32_t lab_count = read_be32(lab, labels_path);
  if (lab_count != count) throw IoError("IDX image/label counts disagree");

  Dataset ds;
  ds.features = Tensor({static_cast<int64_t>(count), dim});
  ds.labels.resize(count);
  std::vector<unsigned char> buf(static_cast<size_t>(dim));
  int max_label = 0;
  for (uint32_t i = 0; i < count; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), dim);
    if (!img) throw IoError("truncated IDX image payload in " + images_path);
    for (int64_t j = 0; j < dim; ++j)
      ds.features(i, j) = static_cast<double>(buf[static_cast<size_t>(j)]) / 255.0;
    char l;
    lab.read(&l, 1);
    if (!lab) throw IoError("truncated IDX label payload in " + labels_path);
    ds.labels[i] = static_cast<unsigned char>(l);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.classes = max_label + 1;
  return ds;
}

}  // namespace bq
