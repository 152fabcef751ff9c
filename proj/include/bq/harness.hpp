#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bq/balanced.hpp"
#include "bq/datasets.hpp"
#include "bq/fixed_point.hpp"
#include "bq/quant.hpp"

namespace bq {

enum class QuantizerMode : uint8_t {
  kImbalanced = 0,
  kBalancedExact = 1,
  kBalancedMean = 2,
  kBalancedMedian = 3,
};

QuantizedTensor quantize_weights(const Tensor& w, int bits, QuantizerMode mode);

const char* quantizer_mode_name(QuantizerMode m);
QuantizerMode quantizer_mode_from_name(const std::string& name);

struct QnnLayerSpec {
  int64_t in = 0;
  int64_t out = 0;
  int weight_bits = 1;
  int activation_bits = 1;  // quantization of this layer's output (not applied after the last layer)
  QuantizerMode mode = QuantizerMode::kImbalanced;
  Activation activation = Activation::kSigmoid;
};

struct LrSchedule {
  double base = 0.1;
  int64_t drop_every = 0;  // epochs; 0 disables the step decay
  double drop_factor = 1.0;

  double at_epoch(int64_t epoch) const;
};

enum class OptimizerKind : uint8_t { kSgd = 0, kAdam = 1 };
enum class ModelKind : uint8_t { kMlp = 0, kGru = 1, kLstm = 2 };

struct TrainConfig {
  int64_t epochs = 10;
  int64_t batch_size = 32;
  LrSchedule lr;
  uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double weight_decay = 0.0;
  bool tanh_clip = false;   // pass weights through tanh before quantization
  int gradient_bits = 0;    // 0 = gradients stay full precision
  int input_bits = 8;       // first-layer input quantization
};

struct ModelSpec {
  ModelKind kind = ModelKind::kMlp;
  std::vector<QnnLayerSpec> layers;  // MLP stack; ignored for RNN kinds
  // RNN fields
  int64_t hidden = 8;
  int rnn_weight_bits = 2;
  int rnn_state_bits = 2;  // k of the recurrent quantization sites
  QuantizerMode rnn_mode = QuantizerMode::kImbalanced;
};

struct EpochMetrics {
  int64_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // 1 - bit_error for sequence tasks
  double ppw = 0.0;       // exp(mean NLL); sequence tasks only, else 0
  std::vector<double> layer_eb;
  double mean_eb = 0.0;
};

std::string metrics_csv(const std::vector<EpochMetrics>& log);

// Serialized training state. Carries both the floating-point parameter
// copies (for resuming) and the quantized weights frozen at save time (the
// inference artifact; scales are not recomputed after export).
struct Checkpoint {
  uint32_t schema_version = 1;
  ModelSpec spec;
  TrainConfig config;
  uint64_t rng_state = 0;
  std::vector<Tensor> weights;  // float copies, fixed per-kind order
  std::vector<Tensor> biases;
  std::vector<QuantizedTensor> frozen;  // quantized weights, same order

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> log;
  // Instrumentation: float-copy reads by quantizers, quantizer invocations.
  int64_t float_copy_reads = 0;
  int64_t quantizer_calls = 0;
};

using TrainData = std::variant<Dataset, SequenceDataset>;

TrainResult train(const TrainConfig& config, const ModelSpec& spec, const TrainData& data);

enum class EvalPath : uint8_t { kFloatReference = 0, kFixedPoint = 1 };

struct EvalResult {
  double loss = 0.0;      // NaN when the path does not produce float losses
  double accuracy = 0.0;  // 1 - bit_error for sequence tasks
  double ppw = 0.0;       // sequence tasks only
};

EvalResult evaluate(const Checkpoint& ckpt, const TrainData& data, EvalPath path);

// Self-contained integer inference model: weight codes, threshold plans and
// the pairwise-threshold classifier head.
struct FixedModel {
  int input_bits = 8;
  struct Layer {
    int64_t in = 0, out = 0;
    int weight_bits = 1;
    std::vector<uint8_t> w_codes;  // in x out
    LayerFixedPlan plan;           // hidden layers only
    bool has_plan = false;
  };
  std::vector<Layer> layers;
  ArgmaxHead head;  // for the last layer

  void save(const std::string& path) const;
  static FixedModel load(const std::string& path);

  // Integer-only prediction per row of quantized inputs.
  std::vector<int> predict(std::span<const uint8_t> x_codes, int64_t batch) const;
};

FixedModel export_fixed(const Checkpoint& ckpt);

// Synthetic dataset selection for the CLI.
struct DataSpec {
  std::string name = "blobs";  // blobs | spirals | copy | idx
  int64_t n = 512;
  int classes = 3;
  double radius = 2.0;
  double stddev = 0.35;
  double noise = 0.15;
  int64_t length = 8;  // copy task
  uint64_t seed = 7;
  std::string idx_images;
  std::string idx_labels;
};

TrainData make_data(const DataSpec& spec);

// JSON round trip for the CLI config file (sections "model", "train", "data").
std::string config_to_json(const TrainConfig& config, const ModelSpec& spec, const DataSpec& data);
void config_from_json(const std::string& text, TrainConfig& config, ModelSpec& spec,
                      DataSpec& data);

}  // namespace bq
