#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bq/harness.hpp"
#include "bq/io.hpp"

namespace bq {

namespace {

using nlohmann::json;

const char* activation_name(Activation a) {
  return a == Activation::kSigmoid ? "sigmoid" : "identity";
}

Activation activation_from_name(const std::string& s) {
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "identity") return Activation::kIdentity;
  throw PreconditionError("unknown activation: " + s);
}

const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kMlp:
      return "mlp";
    case ModelKind::kGru:
      return "gru";
    case ModelKind::kLstm:
      return "lstm";
  }
  return "?";
}

ModelKind kind_from_name(const std::string& s) {
  if (s == "mlp") return ModelKind::kMlp;
  if (s == "gru") return ModelKind::kGru;
  if (s == "lstm") return ModelKind::kLstm;
  throw PreconditionError("unknown model kind: " + s);
}

json spec_to_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers)
    layers.push_back({{"in", l.in},
                      {"out", l.out},
                      {"weight_bits", l.weight_bits},
                      {"activation_bits", l.activation_bits},
                      {"mode", quantizer_mode_name(l.mode)},
                      {"activation", activation_name(l.activation)}});
  return {{"kind", kind_name(spec.kind)},
          {"layers", layers},
          {"hidden", spec.hidden},
          {"rnn_weight_bits", spec.rnn_weight_bits},
          {"rnn_state_bits", spec.rnn_state_bits},
          {"rnn_mode", quantizer_mode_name(spec.rnn_mode)}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  spec.kind = kind_from_name(j.at("kind").get<std::string>());
  for (const auto& l : j.value("layers", json::array())) {
    QnnLayerSpec ls;
    ls.in = l.at("in").get<int64_t>();
    ls.out = l.at("out").get<int64_t>();
    ls.weight_bits = l.at("weight_bits").get<int>();
    ls.activation_bits = l.at("activation_bits").get<int>();
    ls.mode = quantizer_mode_from_name(l.at("mode").get<std::string>());
    ls.activation = activation_from_name(l.value("activation", "sigmoid"));
    spec.layers.push_back(ls);
  }
  spec.hidden = j.value("hidden", int64_t{8});
  spec.rnn_weight_bits = j.value("rnn_weight_bits", 2);
  spec.rnn_state_bits = j.value("rnn_state_bits", 2);
  spec.rnn_mode = quantizer_mode_from_name(j.value("rnn_mode", "imbalanced"));
  return spec;
}

json config_to_json_obj(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", {{"base", c.lr.base}, {"drop_every", c.lr.drop_every}, {"drop_factor", c.lr.drop_factor}}},
          {"seed", c.seed},
          {"optimizer", c.optimizer == OptimizerKind::kSgd ? "sgd" : "adam"},
          {"weight_decay", c.weight_decay},
          {"tanh_clip", c.tanh_clip},
          {"gradient_bits", c.gradient_bits},
          {"input_bits", c.input_bits}};
}

TrainConfig config_from_json_obj(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("lr")) {
    c.lr.base = j["lr"].value("base", c.lr.base);
    c.lr.drop_every = j["lr"].value("drop_every", c.lr.drop_every);
    c.lr.drop_factor = j["lr"].value("drop_factor", c.lr.drop_factor);
  }
  c.seed = j.value("seed", c.seed);
  const std::string opt = j.value("optimizer", "sgd");
  if (opt == "sgd")
    c.optimizer = OptimizerKind::kSgd;
  else if (opt == "adam")
    c.optimizer = OptimizerKind::kAdam;
  else
    throw PreconditionError("unknown optimizer: " + opt);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.tanh_clip = j.value("tanh_clip", c.tanh_clip);
  c.gradient_bits = j.value("gradient_bits", c.gradient_bits);
  c.input_bits = j.value("input_bits", c.input_bits);
  return c;
}

json data_to_json_obj(const DataSpec& d) {
  return {{"name", d.name},       {"n", d.n},           {"classes", d.classes},
          {"radius", d.radius},   {"stddev", d.stddev}, {"noise", d.noise},
          {"length", d.length},   {"seed", d.seed},     {"idx_images", d.idx_images},
          {"idx_labels", d.idx_labels}};
}

DataSpec data_from_json_obj(const json& j) {
  DataSpec d;
  d.name = j.value("name", d.name);
  d.n = j.value("n", d.n);
  d.classes = j.value("classes", d.classes);
  d.radius = j.value("radius", d.radius);
  d.stddev = j.value("stddev", d.stddev);
  d.noise = j.value("noise", d.noise);
  d.length = j.value("length", d.length);
  d.seed = j.value("seed", d.seed);
  d.idx_images = j.value("idx_images", d.idx_images);
  d.idx_labels = j.value("idx_labels", d.idx_labels);
  return d;
}

void put_tensor_payload(std::ostream& os, const Tensor& t) {
  wire::put_bytes(os, t.data().data(), t.data().size() * sizeof(double));
}

Tensor get_tensor_payload(std::istream& is, std::vector<int64_t> shape) {
  Tensor t(std::move(shape));
  wire::get_bytes(is, t.data().data(), t.data().size() * sizeof(double));
  return t;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  json manifest;
  manifest["schema_version"] = schema_version;
  manifest["rng_state"] = rng_state;
  manifest["spec"] = spec_to_json(spec);
  manifest["config"] = config_to_json_obj(config);
  json wshapes = json::array(), bshapes = json::array(), fro = json::array();
  for (const auto& w : weights) wshapes.push_back(w.shape());
  for (const auto& b : biases) bshapes.push_back(b.shape());
  for (const auto& q : frozen)
    fro.push_back({{"bitwidth", q.bitwidth},
                   {"convention", static_cast<int>(q.convention)},
                   {"shape", q.shape}});
  manifest["weights"] = wshapes;
  manifest["biases"] = bshapes;
  manifest["frozen"] = fro;
  const std::string text = manifest.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write("BQCK", 4);
  wire::put_u32(os, 1);
  wire::put_u64(os, text.size());
  wire::put_bytes(os, text.data(), text.size());
  for (const auto& w : weights) put_tensor_payload(os, w);
  for (const auto& b : biases) put_tensor_payload(os, b);
  for (const auto& q : frozen) wire::put_f64(os, q.scale);
  for (const auto& q : frozen) wire::put_bytes(os, q.codes.data(), q.codes.size());
  if (!os) throw IoError("write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  wire::expect_magic(is, "BQCK", "checkpoint");
  if (wire::get_u32(is) != 1) throw IoError("unsupported checkpoint version");
  const uint64_t len = wire::get_u64(is);
  std::string text(len, '\0');
  wire::get_bytes(is, text.data(), len);
  json manifest = json::parse(text);

  Checkpoint ckpt;
  ckpt.schema_version = manifest.at("schema_version").get<uint32_t>();
  ckpt.rng_state = manifest.at("rng_state").get<uint64_t>();
  ckpt.spec = spec_from_json(manifest.at("spec"));
  ckpt.config = config_from_json_obj(manifest.at("config"));
  for (const auto& s : manifest.at("weights"))
    ckpt.weights.push_back(get_tensor_payload(is, s.get<std::vector<int64_t>>()));
  for (const auto& s : manifest.at("biases"))
    ckpt.biases.push_back(get_tensor_payload(is, s.get<std::vector<int64_t>>()));
  for (const auto& f : manifest.at("frozen")) {
    QuantizedTensor q;
    q.bitwidth = f.at("bitwidth").get<int>();
    q.convention = static_cast<Convention>(f.at("convention").get<int>());
    q.shape = f.at("shape").get<std::vector<int64_t>>();
    ckpt.frozen.push_back(std::move(q));
  }
  for (auto& q : ckpt.frozen) q.scale = wire::get_f64(is);
  for (auto& q : ckpt.frozen) {
    int64_t n = 1;
    for (int64_t e : q.shape) n *= e;
    q.codes.resize(static_cast<size_t>(n));
    wire::get_bytes(is, q.codes.data(), q.codes.size());
  }
  return ckpt;
}

void FixedModel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write("BQFX", 4);
  wire::put_u32(os, 1);
  wire::put_u32(os, static_cast<uint32_t>(input_bits));
  wire::put_u32(os, static_cast<uint32_t>(layers.size()));
  for (const auto& l : layers) {
    wire::put_u64(os, static_cast<uint64_t>(l.in));
    wire::put_u64(os, static_cast<uint64_t>(l.out));
    wire::put_u32(os, static_cast<uint32_t>(l.weight_bits));
    const uint8_t has_plan = l.has_plan ? 1 : 0;
    wire::put_bytes(os, &has_plan, 1);
    wire::put_bytes(os, l.w_codes.data(), l.w_codes.size());
    if (!l.has_plan) continue;
    wire::put_u32(os, static_cast<uint32_t>(l.plan.weight_bits));
    wire::put_u32(os, static_cast<uint32_t>(l.plan.input_bits));
    wire::put_u32(os, static_cast<uint32_t>(l.plan.activation_bits));
    wire::put_u32(os, static_cast<uint32_t>(l.plan.units.size()));
    for (const auto& u : l.plan.units) {
      wire::put_u32(os, static_cast<uint32_t>(u.scale_exponent));
      wire::put_f64(os, u.alpha);
      wire::put_f64(os, u.bias);
      const uint8_t flags[3] = {static_cast<uint8_t>(u.ascending ? 1 : 0),
                                static_cast<uint8_t>(u.constant ? 1 : 0), u.constant_code};
      wire::put_bytes(os, flags, 3);
      wire::put_u64(os, u.thresholds.size());
      for (int64_t t : u.thresholds) wire::put_u64(os, static_cast<uint64_t>(t));
    }
  }
  wire::put_u32(os, static_cast<uint32_t>(head.classes));
  const uint8_t hconst = head.constant ? 1 : 0;
  wire::put_bytes(os, &hconst, 1);
  wire::put_u32(os, static_cast<uint32_t>(head.constant_winner));
  if (!head.constant)
    for (int64_t t : head.tau) wire::put_u64(os, static_cast<uint64_t>(t));
  if (!os) throw IoError("write failed: " + path);
}

FixedModel FixedModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  wire::expect_magic(is, "BQFX", "fixed-point model");
  if (wire::get_u32(is) != 1) throw IoError("unsupported fixed-point model version");
  FixedModel fm;
  fm.input_bits = static_cast<int>(wire::get_u32(is));
  const uint32_t n_layers = wire::get_u32(is);
  for (uint32_t i = 0; i < n_layers; ++i) {
    Layer l;
    l.in = static_cast<int64_t>(wire::get_u64(is));
    l.out = static_cast<int64_t>(wire::get_u64(is));
    l.weight_bits = static_cast<int>(wire::get_u32(is));
    uint8_t has_plan = 0;
    wire::get_bytes(is, &has_plan, 1);
    l.has_plan = has_plan != 0;
    l.w_codes.resize(static_cast<size_t>(l.in * l.out));
    wire::get_bytes(is, l.w_codes.data(), l.w_codes.size());
    if (l.has_plan) {
      l.plan.weight_bits = static_cast<int>(wire::get_u32(is));
      l.plan.input_bits = static_cast<int>(wire::get_u32(is));
      l.plan.activation_bits = static_cast<int>(wire::get_u32(is));
      const uint32_t n_units = wire::get_u32(is);
      for (uint32_t u = 0; u < n_units; ++u) {
        ThresholdTable t;
        t.scale_exponent = static_cast<int>(wire::get_u32(is));
        t.alpha = wire::get_f64(is);
        t.bias = wire::get_f64(is);
        uint8_t flags[3];
        wire::get_bytes(is, flags, 3);
        t.ascending = flags[0] != 0;
        t.constant = flags[1] != 0;
        t.constant_code = flags[2];
        const uint64_t n_thr = wire::get_u64(is);
        t.thresholds.resize(n_thr);
        for (auto& v : t.thresholds) v = static_cast<int64_t>(wire::get_u64(is));
        l.plan.units.push_back(std::move(t));
      }
    }
    fm.layers.push_back(std::move(l));
  }
  fm.head.classes = static_cast<int>(wire::get_u32(is));
  uint8_t hconst = 0;
  wire::get_bytes(is, &hconst, 1);
  fm.head.constant = hconst != 0;
  fm.head.constant_winner = static_cast<int>(wire::get_u32(is));
  if (!fm.head.constant) {
    fm.head.tau.resize(static_cast<size_t>(fm.head.classes) * fm.head.classes);
    for (auto& t : fm.head.tau) t = static_cast<int64_t>(wire::get_u64(is));
  }
  return fm;
}

std::string config_to_json(const TrainConfig& config, const ModelSpec& spec, const DataSpec& data) {
  json j;
  j["model"] = spec_to_json(spec);
  j["train"] = config_to_json_obj(config);
  j["data"] = data_to_json_obj(data);
  return j.dump(2) + "\n";
}

void config_from_json(const std::string& text, TrainConfig& config, ModelSpec& spec,
                      DataSpec& data) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw PreconditionError(std::string("config is not valid JSON: ") + e.what());
  }
  if (j.contains("model")) spec = spec_from_json(j["model"]);
  if (j.contains("train")) config = config_from_json_obj(j["train"]);
  if (j.contains("data")) data = data_from_json_obj(j["data"]);
}

}  // namespace bq
