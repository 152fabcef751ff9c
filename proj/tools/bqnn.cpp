// bqnn - balanced-quantization neural network toolkit.
//
// Subcommands: train, eval, quantize, inspect, bench, export-fixed, synth.
// Exit code 0 on success; nonzero with a one-line "error: ..." on stderr.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bq/balanced.hpp"
#include "bq/bench.hpp"
#include "bq/harness.hpp"
#include "bq/io.hpp"
#include "bq/metrics.hpp"

namespace {

bool verbose() {
  const char* v = std::getenv("BQNN_LOG");
  return v == nullptr || std::string(v) != "quiet";
}

void info(const std::string& msg) {
  if (verbose()) std::cerr << msg << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw bq::IoError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<int64_t> parse_i64_list(const std::string& s) {
  std::vector<int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoll(item));
  return out;
}

std::vector<std::pair<int, int>> parse_bit_pairs(const std::string& s) {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) throw bq::PreconditionError("bit pair must look like 2x2");
    out.emplace_back(std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1)));
  }
  return out;
}

int cmd_train(const std::string& config_path, const std::string& out_path,
              const std::string& metrics_path, int64_t seed_override, bool tanh_clip,
              double weight_decay) {
  bq::TrainConfig config;
  bq::ModelSpec spec;
  bq::DataSpec data_spec;
  bq::config_from_json(read_file(config_path), config, spec, data_spec);
  if (seed_override >= 0) config.seed = static_cast<uint64_t>(seed_override);
  if (tanh_clip) config.tanh_clip = true;
  if (weight_decay >= 0.0) config.weight_decay = weight_decay;

  bq::TrainData data = bq::make_data(data_spec);
  bq::TrainResult res = bq::train(config, spec, data);
  res.checkpoint.save(out_path);

  const std::string csv = bq::metrics_csv(res.log);
  if (!metrics_path.empty()) {
    std::ofstream os(metrics_path);
    if (!os) throw bq::IoError("cannot write " + metrics_path);
    os << csv;
  }
  const auto& last = res.log.back();
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "trained %lld epochs: loss=%.6f accuracy=%.4f mean_eb=%.4f -> %s",
                static_cast<long long>(res.log.size()), last.loss, last.accuracy, last.mean_eb,
                out_path.c_str());
  info(buf);
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& config_path,
             const std::string& path_name) {
  bq::Checkpoint ckpt = bq::Checkpoint::load(model_path);
  bq::TrainConfig config;
  bq::ModelSpec spec;
  bq::DataSpec data_spec;
  bq::config_from_json(read_file(config_path), config, spec, data_spec);
  bq::TrainData data = bq::make_data(data_spec);

  bq::EvalPath path;
  if (path_name == "float")
    path = bq::EvalPath::kFloatReference;
  else if (path_name == "fixed")
    path = bq::EvalPath::kFixedPoint;
  else
    throw bq::PreconditionError("--path must be float or fixed");

  bq::EvalResult res = bq::evaluate(ckpt, data, path);
  std::printf("accuracy %.6f\n", res.accuracy);
  if (std::isfinite(res.loss)) std::printf("loss %.6f\n", res.loss);
  if (res.ppw > 0.0) std::printf("ppw %.6f\n", res.ppw);
  return 0;
}

int cmd_quantize(const std::string& in_path, const std::string& out_path, int bits,
                 const std::string& mode_name, const std::string& hist_pre,
                 const std::string& hist_post) {
  const bq::Tensor t = bq::load_tensor(in_path);
  bq::QuantizedTensor q;
  if (mode_name == "imbalanced") {
    q = bq::quantize_uniform(t, bits);
  } else {
    q = bq::quantize_weights(t, bits, bq::quantizer_mode_from_name(mode_name));
  }
  bq::save_quantized(out_path, q);
  if (!hist_pre.empty()) {
    std::ofstream os(hist_pre);
    if (!os) throw bq::IoError("cannot write " + hist_pre);
    bq::write_histogram_csv(os, t, 64);
  }
  if (!hist_post.empty()) {
    std::ofstream os(hist_post);
    if (!os) throw bq::IoError("cannot write " + hist_post);
    bq::CodeHistogram::from_codes(q).write_csv(os, q);
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "quantized %lld values to %d bits (%s), eb=%.4f",
                static_cast<long long>(q.size()), bits, mode_name.c_str(),
                bq::effective_bitwidth(q));
  info(buf);
  return 0;
}

int cmd_inspect(const std::string& path, const std::string& hist_path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw bq::IoError("cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  const std::string m(magic, 4);

  if (m == "BQQT") {
    const bq::QuantizedTensor q = bq::load_quantized(path);
    std::printf("bitwidth %d\n", q.bitwidth);
    std::printf("scale %.17g\n", q.scale);
    std::printf("effective_bitwidth %.3f\n", bq::effective_bitwidth(q));
    if (!hist_path.empty()) {
      std::ofstream os(hist_path);
      if (!os) throw bq::IoError("cannot write " + hist_path);
      bq::CodeHistogram::from_codes(q).write_csv(os, q);
    }
    return 0;
  }
  if (m == "BQCK") {
    const bq::Checkpoint ckpt = bq::Checkpoint::load(path);
    double mean = 0.0;
    for (size_t i = 0; i < ckpt.frozen.size(); ++i) {
      const double eb = bq::effective_bitwidth(ckpt.frozen[i]);
      std::printf("layer %zu effective_bitwidth %.3f\n", i, eb);
      mean += eb;
    }
    std::printf("mean_effective_bitwidth %.3f\n", mean / static_cast<double>(ckpt.frozen.size()));
    if (!hist_path.empty()) {
      std::ofstream os(hist_path);
      if (!os) throw bq::IoError("cannot write " + hist_path);
      bq::CodeHistogram::from_codes(ckpt.frozen.front()).write_csv(os, ckpt.frozen.front());
    }
    return 0;
  }
  throw bq::IoError("unrecognized file type (expected a .q or checkpoint file)");
}

int cmd_bench(const std::string& sizes, const std::string& bits, int repeats, uint64_t seed) {
  const std::vector<bq::BenchRow> rows =
      bq::run_bench(parse_i64_list(sizes), parse_bit_pairs(bits), repeats, seed);
  bq::write_bench_csv(std::cout, rows);
  return 0;
}

int cmd_export_fixed(const std::string& model_path, const std::string& out_path) {
  const bq::Checkpoint ckpt = bq::Checkpoint::load(model_path);
  const bq::FixedModel fm = bq::export_fixed(ckpt);
  fm.save(out_path);
  info("wrote fixed-point model: " + out_path);
  return 0;
}

int cmd_synth_tensor(const std::string& out_path, int64_t rows, int64_t cols,
                     const std::string& dist, uint64_t seed) {
  bq::Rng rng(seed);
  bq::Tensor t({rows, cols});
  for (double& v : t.data()) {
    if (dist == "gaussian")
      v = rng.normal();
    else if (dist == "uniform")
      v = rng.uniform(-1.0, 1.0);
    else if (dist == "exponential")
      v = rng.exponential();
    else
      throw bq::PreconditionError("unknown distribution: " + dist);
  }
  bq::save_tensor(out_path, t);
  return 0;
}

int cmd_synth_config(const std::string& out_path) {
  bq::TrainConfig config;
  config.epochs = 30;
  config.batch_size = 32;
  config.lr.base = 0.5;
  bq::ModelSpec spec;
  spec.layers = {{2, 16, 2, 2, bq::QuantizerMode::kBalancedExact, bq::Activation::kSigmoid},
                 {16, 3, 2, 2, bq::QuantizerMode::kBalancedExact, bq::Activation::kSigmoid}};
  bq::DataSpec data;
  std::ofstream os(out_path);
  if (!os) throw bq::IoError("cannot write " + out_path);
  os << bq::config_to_json(config, spec, data);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"balanced-quantization neural network toolkit"};
  app.require_subcommand(1);

  // train
  std::string train_config, train_out = "model.ckpt", train_metrics;
  int64_t train_seed = -1;
  bool train_tanh_clip = false;
  double train_weight_decay = -1.0;
  auto* train = app.add_subcommand("train", "train a quantized model");
  train->add_option("--config", train_config, "JSON config file")->required();
  train->add_option("--out", train_out, "checkpoint output path");
  train->add_option("--metrics", train_metrics, "per-epoch metrics CSV path");
  train->add_option("--seed", train_seed, "override the config seed");
  train->add_flag("--tanh-clip", train_tanh_clip, "pass weights through tanh before quantizing");
  train->add_option("--weight-decay", train_weight_decay, "override the config weight decay");

  // eval
  std::string eval_model, eval_config, eval_path = "float";
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--model", eval_model, "checkpoint path")->required();
  eval->add_option("--config", eval_config, "JSON config file (data section)")->required();
  eval->add_option("--path", eval_path, "float | fixed");

  // quantize
  std::string q_in, q_out, q_mode = "balanced-exact", q_hist_pre, q_hist_post;
  int q_bits = 2;
  auto* quant = app.add_subcommand("quantize", "quantize a tensor file");
  quant->add_option("input", q_in, "input .tensor file")->required();
  quant->add_option("output", q_out, "output .q file")->required();
  quant->add_option("--bits", q_bits, "bitwidth (1..8)");
  quant->add_option("--mode", q_mode, "imbalanced | balanced-exact | balanced-mean | balanced-median");
  quant->add_option("--hist-pre", q_hist_pre, "pre-quantization histogram CSV");
  quant->add_option("--hist-post", q_hist_post, "post-quantization histogram CSV");

  // inspect
  std::string i_path, i_hist;
  auto* inspect = app.add_subcommand("inspect", "effective bitwidth of a .q file or checkpoint");
  inspect->add_option("input", i_path, "file to inspect")->required();
  inspect->add_option("--hist", i_hist, "code histogram CSV path");

  // bench
  std::string b_sizes = "64,128,256", b_bits = "1x1,2x2,4x4";
  int b_repeats = 5;
  uint64_t b_seed = 42;
  auto* bench = app.add_subcommand("bench", "bit-plane kernel vs naive integer GEMM");
  bench->add_option("--sizes", b_sizes, "comma-separated square sizes");
  bench->add_option("--bits", b_bits, "comma-separated MxK bit pairs");
  bench->add_option("--repeats", b_repeats, "runs per configuration (median reported)");
  bench->add_option("--seed", b_seed, "rng seed");

  // export-fixed
  std::string x_model, x_out = "model.bqfx";
  auto* exportf = app.add_subcommand("export-fixed", "emit a float-free inference model");
  exportf->add_option("--model", x_model, "checkpoint path")->required();
  exportf->add_option("--out", x_out, "output path");

  // synth
  auto* synth = app.add_subcommand("synth", "generate inputs for the other subcommands");
  std::string s_out = "out.tensor", s_dist = "gaussian";
  int64_t s_rows = 64, s_cols = 64;
  uint64_t s_seed = 1;
  auto* synth_tensor = synth->add_subcommand("tensor", "random tensor file");
  synth_tensor->add_option("--out", s_out, "output path");
  synth_tensor->add_option("--rows", s_rows, "rows");
  synth_tensor->add_option("--cols", s_cols, "cols");
  synth_tensor->add_option("--dist", s_dist, "gaussian | uniform | exponential");
  synth_tensor->add_option("--seed", s_seed, "rng seed");
  std::string sc_out = "config.json";
  auto* synth_config = synth->add_subcommand("config", "starter train config");
  synth_config->add_option("--out", sc_out, "output path");
  synth->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train)
      return cmd_train(train_config, train_out, train_metrics, train_seed, train_tanh_clip,
                       train_weight_decay);
    if (*eval) return cmd_eval(eval_model, eval_config, eval_path);
    if (*quant) return cmd_quantize(q_in, q_out, q_bits, q_mode, q_hist_pre, q_hist_post);
    if (*inspect) return cmd_inspect(i_path, i_hist);
    if (*bench) return cmd_bench(b_sizes, b_bits, b_repeats, b_seed);
    if (*exportf) return cmd_export_fixed(x_model, x_out);
    if (*synth) {
      if (*synth_tensor) return cmd_synth_tensor(s_out, s_rows, s_cols, s_dist, s_seed);
      if (*synth_config) return cmd_synth_config(sc_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
