#include "bq/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "bq/metrics.hpp"
#include "bq/rnn.hpp"

namespace bq {

QuantizedTensor quantize_weights(const Tensor& w, int bits, QuantizerMode mode) {
  switch (mode) {
    case QuantizerMode::kImbalanced:
      return quantize_uniform(w, bits);
    case QuantizerMode::kBalancedExact:
      return balanced_quantize(w, bits, EqualizeMode::kExactPercentile).quantized;
    case QuantizerMode::kBalancedMean:
      return balanced_quantize(w, bits, EqualizeMode::kRecursiveMean).quantized;
    case QuantizerMode::kBalancedMedian:
      return balanced_quantize(w, bits, EqualizeMode::kRecursiveMedian).quantized;
  }
  throw ContractError("unknown quantizer mode");
}

const char* quantizer_mode_name(QuantizerMode m) {
  switch (m) {
    case QuantizerMode::kImbalanced:
      return "imbalanced";
    case QuantizerMode::kBalancedExact:
      return "balanced-exact";
    case QuantizerMode::kBalancedMean:
      return "balanced-mean";
    case QuantizerMode::kBalancedMedian:
      return "balanced-median";
  }
  return "?";
}

QuantizerMode quantizer_mode_from_name(const std::string& name) {
  if (name == "imbalanced") return QuantizerMode::kImbalanced;
  if (name == "balanced-exact") return QuantizerMode::kBalancedExact;
  if (name == "balanced-mean") return QuantizerMode::kBalancedMean;
  if (name == "balanced-median") return QuantizerMode::kBalancedMedian;
  throw PreconditionError("unknown quantizer mode: " + name);
}

double LrSchedule::at_epoch(int64_t epoch) const {
  if (drop_every <= 0) return base;
  return base * std::pow(drop_factor, static_cast<double>(epoch / drop_every));
}

std::string metrics_csv(const std::vector<EpochMetrics>& log) {
  std::string out = "epoch,loss,accuracy,ppw,mean_eb";
  if (!log.empty())
    for (size_t i = 0; i < log.front().layer_eb.size(); ++i)
      out += ",eb_" + std::to_string(i);
  out += "\n";
  char buf[512];
  for (const auto& m : log) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g",
                  static_cast<long long>(m.epoch), m.loss, m.accuracy, m.ppw, m.mean_eb);
    out += buf;
    for (double eb : m.layer_eb) {
      std::snprintf(buf, sizeof(buf), ",%.17g", eb);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

namespace {

constexpr const char* kDivergenceHint =
    "; weight magnitudes may be growing, consider --tanh-clip or --weight-decay";

Tensor xavier_init(int64_t in, int64_t out, Rng& rng) {
  Tensor w({in, out});
  const double r = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& v : w.data()) v = rng.uniform(-r, r);
  return w;
}

// Gradient quantizer site: identity forward, G-bit symmetric quantization of
// the incoming gradient on the way back.
NodeId grad_quant_node(Graph& g, NodeId x, int bits) {
  return g.custom(
      g.value(x), {x},
      [x, bits](Graph& gr, NodeId self) {
        gr.accumulate_grad(x, quant_k(gr.grad(self), bits));
      },
      "grad_quant");
}

struct ParamSet {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
};

ParamSet init_params(const ModelSpec& spec, Rng& rng) {
  ParamSet p;
  switch (spec.kind) {
    case ModelKind::kMlp: {
      if (spec.layers.empty()) throw PreconditionError("MLP needs at least one layer");
      for (const auto& l : spec.layers) {
        p.weights.push_back(xavier_init(l.in, l.out, rng));
        p.biases.push_back(Tensor({1, l.out}));
      }
      break;
    }
    case ModelKind::kGru: {
      const int64_t io = spec.hidden + 1;
      for (int i = 0; i < 3; ++i) p.weights.push_back(xavier_init(io, spec.hidden, rng));
      p.weights.push_back(xavier_init(spec.hidden, 1, rng));  // readout
      p.biases.push_back(Tensor({1, 1}));                     // readout bias
      break;
    }
    case ModelKind::kLstm: {
      const int64_t io = spec.hidden + 1;
      for (int i = 0; i < 4; ++i) p.weights.push_back(xavier_init(io, spec.hidden, rng));
      p.weights.push_back(xavier_init(spec.hidden, 1, rng));  // readout
      for (int i = 0; i < 4; ++i) p.biases.push_back(Tensor({1, spec.hidden}));
      p.biases.push_back(Tensor({1, 1}));  // readout bias
      break;
    }
  }
  return p;
}

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double weight_decay) : kind_(kind), weight_decay_(weight_decay) {}

  void step(std::vector<Tensor>& weights, std::vector<Tensor>& biases,
            const std::vector<Tensor>& w_grads, const std::vector<Tensor>& b_grads, double lr) {
    std::vector<Tensor*> params;
    std::vector<const Tensor*> grads;
    for (size_t i = 0; i < weights.size(); ++i) {
      params.push_back(&weights[i]);
      grads.push_back(&w_grads[i]);
    }
    for (size_t i = 0; i < biases.size(); ++i) {
      params.push_back(&biases[i]);
      grads.push_back(&b_grads[i]);
    }
    if (m_.empty() && kind_ == OptimizerKind::kAdam) {
      for (auto* p : params) {
        m_.emplace_back(p->shape());
        v_.emplace_back(p->shape());
      }
    }
    ++t_;
    for (size_t i = 0; i < params.size(); ++i) apply(*params[i], *grads[i], lr, i);
  }

 private:
  void apply(Tensor& w, const Tensor& g, double lr, size_t slot) {
    auto wd = w.data();
    auto gd = g.data();
    if (kind_ == OptimizerKind::kSgd) {
      for (size_t i = 0; i < wd.size(); ++i) {
        const double grad = gd[i] + weight_decay_ * wd[i];
        wd[i] -= lr * grad;
      }
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    auto md = m_[slot].data();
    auto vd = v_[slot].data();
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (size_t i = 0; i < wd.size(); ++i) {
      const double grad = gd[i] + weight_decay_ * wd[i];
      md[i] = b1 * md[i] + (1.0 - b1) * grad;
      vd[i] = b2 * vd[i] + (1.0 - b2) * grad * grad;
      wd[i] -= lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + eps);
    }
  }

  OptimizerKind kind_;
  double weight_decay_;
  std::vector<Tensor> m_, v_;
  int64_t t_ = 0;
};

struct Instrumentation {
  int64_t float_copy_reads = 0;
  int64_t quantizer_calls = 0;
};

// Quantize one parameter tensor and splice it into the graph as an STE node.
// The float copy is read here and nowhere else on the forward path.
NodeId splice_quantized(Graph& g, const Tensor& w_float, int bits, QuantizerMode mode,
                        bool tanh_clip, Instrumentation* instr, NodeId* leaf_out,
                        QuantizedTensor* codes_out) {
  if (instr) {
    ++instr->float_copy_reads;
    ++instr->quantizer_calls;
  }
  NodeId leaf = g.leaf(w_float);
  NodeId src = tanh_clip ? g.tanh(leaf) : leaf;
  QuantizedTensor q = quantize_weights(g.value(src), bits, mode);
  if (codes_out) *codes_out = q;
  if (leaf_out) *leaf_out = leaf;
  return ste_custom(g, src, q.dequantize(), "ste_weight_quant");
}

struct MlpForward {
  NodeId output = -1;
  std::vector<NodeId> weight_leaves;
  std::vector<NodeId> bias_leaves;
  std::vector<NodeId> wq_nodes;
  std::vector<QuantizedTensor> wq_codes;
};

MlpForward build_mlp_forward(Graph& g, const ModelSpec& spec, const ParamSet& params,
                             const Tensor& x0, const TrainConfig& cfg, Instrumentation* instr) {
  MlpForward f;
  NodeId x = g.constant(x0);
  const size_t n_layers = spec.layers.size();
  for (size_t i = 0; i < n_layers; ++i) {
    const auto& l = spec.layers[i];
    NodeId leaf = -1;
    QuantizedTensor codes;
    NodeId wq = splice_quantized(g, params.weights[i], l.weight_bits, l.mode, cfg.tanh_clip,
                                 instr, &leaf, &codes);
    NodeId bias = g.leaf(params.biases[i]);
    f.weight_leaves.push_back(leaf);
    f.bias_leaves.push_back(bias);
    f.wq_nodes.push_back(wq);
    f.wq_codes.push_back(std::move(codes));

    NodeId z = g.add_rowvec(g.matmul(x, wq), bias);
    if (cfg.gradient_bits > 0) z = grad_quant_node(g, z, cfg.gradient_bits);
    NodeId a = (l.activation == Activation::kSigmoid) ? g.sigmoid(z) : z;
    x = (i + 1 < n_layers) ? ste_q_k(g, a, l.activation_bits) : a;
  }
  f.output = x;
  return f;
}

Tensor one_hot(const std::vector<int>& labels, const std::vector<int64_t>& rows, int classes) {
  Tensor t({static_cast<int64_t>(rows.size()), classes});
  for (size_t i = 0; i < rows.size(); ++i)
    t(static_cast<int64_t>(i), labels[static_cast<size_t>(rows[i])]) = 1.0;
  return t;
}

NodeId mse_loss(Graph& g, NodeId pred, const Tensor& target) {
  NodeId diff = g.add(pred, g.constant(affine(target, -1.0, 0.0)));
  NodeId sq = g.hadamard(diff, diff);
  return g.affine(g.sum(sq), 1.0 / static_cast<double>(target.rows()), 0.0);
}

int argmax_row(const Tensor& t, int64_t row) {
  int best = 0;
  for (int64_t j = 1; j < t.cols(); ++j)
    if (t(row, j) > t(row, best)) best = static_cast<int>(j);
  return best;
}

Tensor gather_rows(const Tensor& src, const std::vector<int64_t>& rows) {
  Tensor out({static_cast<int64_t>(rows.size()), src.cols()});
  for (size_t i = 0; i < rows.size(); ++i)
    for (int64_t j = 0; j < src.cols(); ++j)
      out(static_cast<int64_t>(i), j) = src(rows[i], j);
  return out;
}

struct RnnForward {
  NodeId loss = -1;
  std::vector<NodeId> weight_leaves;
  std::vector<NodeId> bias_leaves;
  std::vector<QuantizedTensor> wq_codes;
  double bit_error = 0.0;
  double nll = 0.0;
};

RnnForward build_rnn_forward(Graph& g, const ModelSpec& spec, const ParamSet& params,
                             const Tensor& bits, const TrainConfig& cfg, Instrumentation* instr) {
  RnnForward f;
  const int64_t batch = bits.rows();
  const int64_t seq_len = bits.cols();
  const bool is_gru = spec.kind == ModelKind::kGru;
  const size_t n_cell_w = is_gru ? 3 : 4;

  std::vector<NodeId> wq(n_cell_w + 1);
  f.weight_leaves.resize(params.weights.size());
  f.wq_codes.resize(params.weights.size());
  for (size_t i = 0; i < params.weights.size(); ++i)
    wq[i] = splice_quantized(g, params.weights[i], spec.rnn_weight_bits, spec.rnn_mode,
                             cfg.tanh_clip, instr, &f.weight_leaves[i], &f.wq_codes[i]);

  for (const auto& b : params.biases) f.bias_leaves.push_back(g.leaf(b));

  NodeId h = g.constant(Tensor({batch, spec.hidden}));
  NodeId c = is_gru ? -1 : g.constant(Tensor({batch, spec.hidden}));

  NodeId total = g.constant(Tensor::scalar(0.0));
  int64_t wrong = 0;
  double nll_sum = 0.0;

  for (int64_t t = 0; t < seq_len; ++t) {
    Tensor xt({batch, 1});
    for (int64_t i = 0; i < batch; ++i) xt(i, 0) = bits(i, t);
    NodeId x = g.constant(xt);

    if (is_gru) {
      GruWeights w;
      w.w_update = wq[0];
      w.w_reset = wq[1];
      w.w_candidate = wq[2];
      w.weight_bits = spec.rnn_weight_bits;
      h = gru_step(g, h, x, w, spec.rnn_state_bits).h;
    } else {
      LstmWeights w;
      w.w_forget = wq[0];
      w.w_input = wq[1];
      w.w_candidate = wq[2];
      w.w_output = wq[3];
      w.weight_bits = spec.rnn_weight_bits;
      w.bias_forget = f.bias_leaves[0];
      w.bias_input = f.bias_leaves[1];
      w.bias_candidate = f.bias_leaves[2];
      w.bias_output = f.bias_leaves[3];
      LstmStepResult r = lstm_step(g, h, c, x, w, spec.rnn_state_bits);
      h = r.h;
      c = r.c;
    }

    if (t >= 1) {
      // Predict the previous bit from the state after consuming bit t.
      NodeId logits = g.add_rowvec(g.matmul(h, wq[n_cell_w]), f.bias_leaves.back());
      NodeId pred = g.sigmoid(logits);
      Tensor target({batch, 1});
      for (int64_t i = 0; i < batch; ++i) target(i, 0) = bits(i, t - 1);
      total = g.add(total, mse_loss(g, pred, target));

      const Tensor& pv = g.value(pred);
      for (int64_t i = 0; i < batch; ++i) {
        const double p = std::clamp(pv(i, 0), 1e-12, 1.0 - 1e-12);
        const double y = target(i, 0);
        if ((pv(i, 0) > 0.5 ? 1.0 : 0.0) != y) ++wrong;
        nll_sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
      }
    }
  }
  f.loss = g.affine(total, 1.0 / static_cast<double>(seq_len - 1), 0.0);
  const double preds = static_cast<double>(batch * (seq_len - 1));
  f.bit_error = static_cast<double>(wrong) / preds;
  f.nll = nll_sum / preds;
  return f;
}

std::vector<double> layer_effective_bitwidths(const ModelSpec& spec, const ParamSet& params,
                                              const TrainConfig& cfg) {
  std::vector<double> ebs;
  if (spec.kind == ModelKind::kMlp) {
    for (size_t i = 0; i < spec.layers.size(); ++i) {
      Tensor w = cfg.tanh_clip ? tanh_t(params.weights[i]) : params.weights[i];
      ebs.push_back(
          effective_bitwidth(quantize_weights(w, spec.layers[i].weight_bits, spec.layers[i].mode)));
    }
  } else {
    for (const auto& wt : params.weights) {
      Tensor w = cfg.tanh_clip ? tanh_t(wt) : wt;
      ebs.push_back(effective_bitwidth(quantize_weights(w, spec.rnn_weight_bits, spec.rnn_mode)));
    }
  }
  return ebs;
}

std::vector<QuantizedTensor> freeze_weights(const ModelSpec& spec, const ParamSet& params,
                                            const TrainConfig& cfg) {
  std::vector<QuantizedTensor> frozen;
  if (spec.kind == ModelKind::kMlp) {
    for (size_t i = 0; i < spec.layers.size(); ++i) {
      Tensor w = cfg.tanh_clip ? tanh_t(params.weights[i]) : params.weights[i];
      frozen.push_back(quantize_weights(w, spec.layers[i].weight_bits, spec.layers[i].mode));
    }
  } else {
    for (const auto& wt : params.weights) {
      Tensor w = cfg.tanh_clip ? tanh_t(wt) : wt;
      frozen.push_back(quantize_weights(w, spec.rnn_weight_bits, spec.rnn_mode));
    }
  }
  return frozen;
}

}  // namespace

TrainResult train(const TrainConfig& config, const ModelSpec& spec, const TrainData& data) {
  if (config.epochs < 1 || config.batch_size < 1)
    throw PreconditionError("epochs and batch size must be positive");
  check_bitwidth(config.input_bits);

  Rng rng(config.seed);
  ParamSet params = init_params(spec, rng);
  Optimizer opt(config.optimizer, config.weight_decay);
  Instrumentation instr;

  TrainResult result;
  const bool is_mlp = spec.kind == ModelKind::kMlp;
  if (is_mlp && !std::holds_alternative<Dataset>(data))
    throw PreconditionError("MLP training expects a classification dataset");
  if (!is_mlp && !std::holds_alternative<SequenceDataset>(data))
    throw PreconditionError("RNN training expects a sequence dataset");

  const int64_t n = is_mlp ? std::get<Dataset>(data).size() : std::get<SequenceDataset>(data).size();
  if (n == 0) throw PreconditionError("dataset is empty");

  try {
    for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
      const double lr = config.lr.at_epoch(epoch);
      std::vector<int64_t> order(static_cast<size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      for (int64_t i = n - 1; i > 0; --i)
        std::swap(order[static_cast<size_t>(i)],
                  order[static_cast<size_t>(rng.uniform_int(0, i))]);

      double loss_sum = 0.0;
      double nll_sum = 0.0;
      int64_t correct = 0;
      int64_t seen = 0;

      for (int64_t start = 0; start < n; start += config.batch_size) {
        const int64_t stop = std::min(n, start + config.batch_size);
        std::vector<int64_t> rows(order.begin() + start, order.begin() + stop);
        const auto bsz = static_cast<int64_t>(rows.size());

        Graph g;
        NodeId loss = -1;
        if (is_mlp) {
          const auto& ds = std::get<Dataset>(data);
          Tensor xb = gather_rows(ds.features, rows);
          Tensor x0 = quantize_unit(xb, config.input_bits).dequantize();
          MlpForward f = build_mlp_forward(g, spec, params, x0, config, &instr);
          Tensor target = one_hot(ds.labels, rows, ds.classes);
          loss = mse_loss(g, f.output, target);
          const Tensor& out = g.value(f.output);
          for (int64_t i = 0; i < bsz; ++i)
            if (argmax_row(out, i) == ds.labels[static_cast<size_t>(rows[static_cast<size_t>(i)])])
              ++correct;
          g.backward(loss);
          std::vector<Tensor> wg, bg;
          for (size_t i = 0; i < params.weights.size(); ++i) wg.push_back(g.grad(f.weight_leaves[i]));
          for (size_t i = 0; i < params.biases.size(); ++i) bg.push_back(g.grad(f.bias_leaves[i]));
          opt.step(params.weights, params.biases, wg, bg, lr);
        } else {
          const auto& ds = std::get<SequenceDataset>(data);
          Tensor bb = gather_rows(ds.bits, rows);
          RnnForward f = build_rnn_forward(g, spec, params, bb, config, &instr);
          loss = f.loss;
          correct += static_cast<int64_t>(
              std::llround((1.0 - f.bit_error) * static_cast<double>(bsz * (bb.cols() - 1))));
          nll_sum += f.nll * static_cast<double>(bsz);
          g.backward(loss);
          std::vector<Tensor> wg, bg;
          for (size_t i = 0; i < params.weights.size(); ++i) wg.push_back(g.grad(f.weight_leaves[i]));
          for (size_t i = 0; i < params.biases.size(); ++i) bg.push_back(g.grad(f.bias_leaves[i]));
          opt.step(params.weights, params.biases, wg, bg, lr);
        }

        const double lv = g.value(loss)[0];
        if (!std::isfinite(lv)) throw DivergenceError("loss is not finite");
        loss_sum += lv * static_cast<double>(bsz);
        seen += bsz;
      }

      EpochMetrics m;
      m.epoch = epoch;
      m.loss = loss_sum / static_cast<double>(seen);
      if (is_mlp) {
        m.accuracy = static_cast<double>(correct) / static_cast<double>(seen);
        m.ppw = 0.0;
      } else {
        const int64_t L = std::get<SequenceDataset>(data).length();
        m.accuracy = static_cast<double>(correct) / static_cast<double>(seen * (L - 1));
        m.ppw = std::exp(nll_sum / static_cast<double>(seen));
      }
      m.layer_eb = layer_effective_bitwidths(spec, params, config);
      m.mean_eb = std::accumulate(m.layer_eb.begin(), m.layer_eb.end(), 0.0) /
                  static_cast<double>(m.layer_eb.size());
      result.log.push_back(std::move(m));
    }
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string(e.what()) + kDivergenceHint);
  }

  result.checkpoint.schema_version = 1;
  result.checkpoint.spec = spec;
  result.checkpoint.config = config;
  result.checkpoint.rng_state = rng.state();
  result.checkpoint.weights = params.weights;
  result.checkpoint.biases = params.biases;
  result.checkpoint.frozen = freeze_weights(spec, params, config);
  result.float_copy_reads = instr.float_copy_reads;
  result.quantizer_calls = instr.quantizer_calls;
  return result;
}

namespace {

// Float-reference inference for an MLP checkpoint, consuming the frozen
// quantized weights. Hidden layers run code-to-code (the reference side of
// the fixed-point equivalence); the last layer produces float activations.
struct MlpReference {
  std::vector<int> predictions;
  double loss = 0.0;  // MSE against one-hot labels
};

MlpReference run_mlp_reference(const Checkpoint& ckpt, const Dataset& ds) {
  const auto& layers = ckpt.spec.layers;
  const int64_t n = ds.size();
  QuantizedTensor xq = quantize_unit(ds.features, ckpt.config.input_bits);
  std::vector<uint8_t> codes = xq.codes;
  int x_bits = ckpt.config.input_bits;

  for (size_t i = 0; i + 1 < layers.size(); ++i) {
    const auto& l = layers[i];
    const auto& w = ckpt.frozen[i];
    codes = reference_layer_codes(codes, n, l.in, w.codes, l.out, w.scale, l.weight_bits, x_bits,
                                  ckpt.biases[i], l.activation, l.activation_bits);
    x_bits = l.activation_bits;
  }

  const auto& last = layers.back();
  const auto& w = ckpt.frozen.back();
  const double dw = static_cast<double>((1 << last.weight_bits) - 1);
  const double dx = static_cast<double>((1 << x_bits) - 1);
  MlpReference ref;
  ref.predictions.resize(static_cast<size_t>(n));
  double loss = 0.0;
  for (int64_t r = 0; r < n; ++r) {
    double best = -std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (int64_t o = 0; o < last.out; ++o) {
      double z = 0.0;
      for (int64_t j = 0; j < last.in; ++j) {
        const double wv =
            w.scale *
            ((2.0 * static_cast<double>(w.codes[static_cast<size_t>(j * last.out + o)]) - dw) / dw);
        const double xv = static_cast<double>(codes[static_cast<size_t>(r * last.in + j)]) / dx;
        z += wv * xv;
      }
      z += ckpt.biases.back()[o];
      const double v = (last.activation == Activation::kSigmoid) ? sigmoid_scalar(z) : z;
      const double target = (ds.labels[static_cast<size_t>(r)] == o) ? 1.0 : 0.0;
      loss += (v - target) * (v - target);
      if (v > best) {
        best = v;
        best_c = static_cast<int>(o);
      }
    }
    ref.predictions[static_cast<size_t>(r)] = best_c;
  }
  ref.loss = loss / static_cast<double>(n);
  return ref;
}

EvalResult evaluate_rnn_reference(const Checkpoint& ckpt, const SequenceDataset& ds) {
  // Rebuild the forward pass from the frozen quantized weights as constants;
  // no re-quantization, no gradients.
  const ModelSpec& spec = ckpt.spec;
  ParamSet params;
  for (const auto& q : ckpt.frozen) params.weights.push_back(q.dequantize());
  params.biases = ckpt.biases;
  Graph g;
  RnnForward f;
  {
    const bool is_gru = spec.kind == ModelKind::kGru;
    const size_t n_cell_w = is_gru ? 3 : 4;
    std::vector<NodeId> wq(params.weights.size());
    for (size_t i = 0; i < params.weights.size(); ++i) wq[i] = g.constant(params.weights[i]);
    std::vector<NodeId> bias_nodes;
    for (const auto& b : params.biases) bias_nodes.push_back(g.constant(b));

    const int64_t batch = ds.size();
    NodeId h = g.constant(Tensor({batch, spec.hidden}));
    NodeId c = is_gru ? -1 : g.constant(Tensor({batch, spec.hidden}));
    NodeId total = g.constant(Tensor::scalar(0.0));
    int64_t wrong = 0;
    double nll_sum = 0.0;
    const int64_t seq_len = ds.length();
    for (int64_t t = 0; t < seq_len; ++t) {
      Tensor xt({batch, 1});
      for (int64_t i = 0; i < batch; ++i) xt(i, 0) = ds.bits(i, t);
      NodeId x = g.constant(xt);
      if (is_gru) {
        GruWeights w;
        w.w_update = wq[0];
        w.w_reset = wq[1];
        w.w_candidate = wq[2];
        w.weight_bits = spec.rnn_weight_bits;
        h = gru_step(g, h, x, w, spec.rnn_state_bits).h;
      } else {
        LstmWeights w;
        w.w_forget = wq[0];
        w.w_input = wq[1];
        w.w_candidate = wq[2];
        w.w_output = wq[3];
        w.weight_bits = spec.rnn_weight_bits;
        w.bias_forget = bias_nodes[0];
        w.bias_input = bias_nodes[1];
        w.bias_candidate = bias_nodes[2];
        w.bias_output = bias_nodes[3];
        LstmStepResult r = lstm_step(g, h, c, x, w, spec.rnn_state_bits);
        h = r.h;
        c = r.c;
      }
      if (t >= 1) {
        NodeId pred = g.sigmoid(g.add_rowvec(g.matmul(h, wq[n_cell_w]), bias_nodes.back()));
        Tensor target({batch, 1});
        for (int64_t i = 0; i < batch; ++i) target(i, 0) = ds.bits(i, t - 1);
        total = g.add(total, mse_loss(g, pred, target));
        const Tensor& pv = g.value(pred);
        for (int64_t i = 0; i < batch; ++i) {
          const double p = std::clamp(pv(i, 0), 1e-12, 1.0 - 1e-12);
          const double y = target(i, 0);
          if ((pv(i, 0) > 0.5 ? 1.0 : 0.0) != y) ++wrong;
          nll_sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        }
      }
    }
    f.loss = g.affine(total, 1.0 / static_cast<double>(seq_len - 1), 0.0);
    const double preds = static_cast<double>(batch * (seq_len - 1));
    f.bit_error = static_cast<double>(wrong) / preds;
    f.nll = nll_sum / preds;
  }
  EvalResult res;
  res.loss = g.value(f.loss)[0];
  res.accuracy = 1.0 - f.bit_error;
  res.ppw = std::exp(f.nll);
  return res;
}

}  // namespace

EvalResult evaluate(const Checkpoint& ckpt, const TrainData& data, EvalPath path) {
  if (ckpt.spec.kind == ModelKind::kMlp) {
    if (!std::holds_alternative<Dataset>(data))
      throw PreconditionError("MLP checkpoint expects a classification dataset");
    const auto& ds = std::get<Dataset>(data);
    if (ds.size() == 0) throw PreconditionError("dataset is empty");
    EvalResult res;
    if (path == EvalPath::kFloatReference) {
      MlpReference ref = run_mlp_reference(ckpt, ds);
      int64_t correct = 0;
      for (int64_t i = 0; i < ds.size(); ++i)
        if (ref.predictions[static_cast<size_t>(i)] == ds.labels[static_cast<size_t>(i)]) ++correct;
      res.loss = ref.loss;
      res.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    } else {
      FixedModel fm = export_fixed(ckpt);
      QuantizedTensor xq = quantize_unit(ds.features, ckpt.config.input_bits);
      std::vector<int> preds = fm.predict(xq.codes, ds.size());
      int64_t correct = 0;
      for (int64_t i = 0; i < ds.size(); ++i)
        if (preds[static_cast<size_t>(i)] == ds.labels[static_cast<size_t>(i)]) ++correct;
      res.loss = std::numeric_limits<double>::quiet_NaN();  // integer path has no float loss
      res.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    }
    return res;
  }

  if (!std::holds_alternative<SequenceDataset>(data))
    throw PreconditionError("RNN checkpoint expects a sequence dataset");
  const auto& ds = std::get<SequenceDataset>(data);
  if (ds.size() == 0) throw PreconditionError("dataset is empty");
  if (path == EvalPath::kFixedPoint)
    throw ContractError("fixed-point path: recurrent layer '" +
                        std::string(ckpt.spec.kind == ModelKind::kGru ? "gru" : "lstm") +
                        "' has no integer threshold form");
  return evaluate_rnn_reference(ckpt, ds);
}

std::vector<int> FixedModel::predict(std::span<const uint8_t> x_codes, int64_t batch) const {
  std::vector<uint8_t> codes(x_codes.begin(), x_codes.end());
  for (size_t i = 0; i + 1 < layers.size(); ++i) {
    const auto& l = layers[i];
    codes = eval_layer_fixed(codes, batch, l.in, l.w_codes, l.out, l.plan);
  }
  const auto& last = layers.back();
  const int last_x_bits = layers.size() >= 2 ? layers[layers.size() - 2].plan.activation_bits
                                             : input_bits;
  std::vector<int64_t> acc = layer_accumulators(codes, batch, last.in, last.w_codes, last.out,
                                                last.weight_bits, last_x_bits);
  std::vector<int> preds(static_cast<size_t>(batch));
  for (int64_t i = 0; i < batch; ++i)
    preds[static_cast<size_t>(i)] = eval_argmax_fixed(
        std::span<const int64_t>(acc.data() + i * last.out, static_cast<size_t>(last.out)), head);
  return preds;
}

FixedModel export_fixed(const Checkpoint& ckpt) {
  if (ckpt.spec.kind != ModelKind::kMlp)
    throw ContractError("fixed-point export: recurrent layer '" +
                        std::string(ckpt.spec.kind == ModelKind::kGru ? "gru" : "lstm") +
                        "' has no integer threshold form");
  FixedModel fm;
  fm.input_bits = ckpt.config.input_bits;
  int x_bits = ckpt.config.input_bits;
  for (size_t i = 0; i < ckpt.spec.layers.size(); ++i) {
    const auto& l = ckpt.spec.layers[i];
    const auto& w = ckpt.frozen[i];
    FixedModel::Layer layer;
    layer.in = l.in;
    layer.out = l.out;
    layer.weight_bits = l.weight_bits;
    layer.w_codes = w.codes;
    if (i + 1 < ckpt.spec.layers.size()) {
      layer.plan = plan_layer(w.scale, l.weight_bits, x_bits, ckpt.biases[i], l.activation,
                              l.activation_bits);
      layer.has_plan = true;
      x_bits = l.activation_bits;
    } else {
      const double dw = static_cast<double>((1 << l.weight_bits) - 1);
      const double dx = static_cast<double>((1 << x_bits) - 1);
      fm.head = plan_argmax_head(w.scale / (dw * dx), ckpt.biases[i]);
    }
    fm.layers.push_back(std::move(layer));
  }
  return fm;
}

TrainData make_data(const DataSpec& spec) {
  Rng rng(spec.seed);
  if (spec.name == "blobs") return make_blobs(spec.n, spec.classes, spec.radius, spec.stddev, rng);
  if (spec.name == "spirals") return make_two_spirals(spec.n, spec.noise, rng);
  if (spec.name == "copy") return make_copy_task(spec.n, spec.length, rng);
  if (spec.name == "idx") return load_idx(spec.idx_images, spec.idx_labels);
  throw PreconditionError("unknown dataset: " + spec.name);
}

}  // namespace bq
