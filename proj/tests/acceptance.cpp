// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code is the number of
// failing criteria.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "bq/balanced.hpp"
#include "bq/bitplane.hpp"
#include "bq/fixed_point.hpp"
#include "bq/harness.hpp"
#include "bq/metrics.hpp"
#include "bq/rnn.hpp"
#include "oracles.hpp"

using bq::Tensor;

namespace {

std::string g_detail;

void detail(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  g_detail = buf;
}

// ---------------------------------------------------------------- criterion 1
bool bit_kernel_exactness() {
  bq::Rng rng(1001);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto m = rng.uniform_int(1, 64);
    const auto k = rng.uniform_int(1, 64);
    const auto n = rng.uniform_int(1, 64);
    const int mb = static_cast<int>(rng.uniform_int(1, 4));
    const int kb = static_cast<int>(rng.uniform_int(1, 4));
    const std::vector<uint8_t> a = oracle::random_codes(m * k, mb, rng);
    const std::vector<uint8_t> b = oracle::random_codes(k * n, kb, rng);
    const auto got =
        bq::gemm_multibit(bq::BitPlaneMatrix::pack(a, m, k, mb),
                          bq::BitPlaneMatrix::pack(b, k, n, kb, bq::PlaneLayout::kColMajor));
    if (got != oracle::gemm_codes(a, b, m, k, n)) {
      detail("mismatch at trial %d (m=%lld k=%lld n=%lld M=%d K=%d)", trial,
             static_cast<long long>(m), static_cast<long long>(k), static_cast<long long>(n), mb,
             kb);
      return false;
    }
  }
  detail("10000 randomized GEMMs bit-exact");
  return true;
}

// ---------------------------------------------------------------- criterion 2
bool fixed_inference_equivalence() {
  // exhaustive: 1-bit weights x 2-bit activations, inner dim <= 4
  int64_t checked = 0;
  const std::pair<double, double> params[] = {{0.7, 0.0}, {1.0, 0.25}, {0.35, -0.6}, {2.2, 1.1}};
  for (int64_t d = 1; d <= 4; ++d) {
    for (auto [w_scale, bias] : params) {
      Tensor biases({1}, {bias});
      const bq::LayerFixedPlan plan =
          bq::plan_layer(w_scale, 1, 2, biases, bq::Activation::kSigmoid, 2);
      for (int64_t wi = 0; wi < (int64_t{1} << d); ++wi) {
        std::vector<uint8_t> w(static_cast<size_t>(d));
        for (int64_t j = 0; j < d; ++j) w[static_cast<size_t>(j)] = (wi >> j) & 1;
        for (int64_t xi = 0; xi < (int64_t{1} << (2 * d)); ++xi) {
          std::vector<uint8_t> x(static_cast<size_t>(d));
          for (int64_t j = 0; j < d; ++j) x[static_cast<size_t>(j)] = (xi >> (2 * j)) & 3;
          const auto fixed = bq::eval_layer_fixed(x, 1, d, w, 1, plan);
          const auto ref = bq::reference_layer_codes(x, 1, d, w, 1, w_scale, 1, 2, biases,
                                                     bq::Activation::kSigmoid, 2);
          if (fixed != ref) {
            detail("exhaustive mismatch at d=%lld wi=%lld xi=%lld", static_cast<long long>(d),
                   static_cast<long long>(wi), static_cast<long long>(xi));
            return false;
          }
          ++checked;
        }
      }
    }
  }
  // randomized 4-bit layers
  bq::Rng rng(1002);
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t in = rng.uniform_int(1, 12);
    const int64_t out = rng.uniform_int(1, 6);
    const int64_t batch = rng.uniform_int(1, 4);
    const double w_scale = rng.uniform(0.05, 3.0);
    Tensor biases({out});
    for (double& v : biases.data()) v = rng.normal();
    const std::vector<uint8_t> w = oracle::random_codes(in * out, 4, rng);
    const std::vector<uint8_t> x = oracle::random_codes(batch * in, 4, rng);
    const bq::LayerFixedPlan plan =
        bq::plan_layer(w_scale, 4, 4, biases, bq::Activation::kSigmoid, 4);
    const auto fixed = bq::eval_layer_fixed(x, batch, in, w, out, plan);
    const auto ref = bq::reference_layer_codes(x, batch, in, w, out, w_scale, 4, 4, biases,
                                               bq::Activation::kSigmoid, 4);
    if (fixed != ref) {
      detail("randomized mismatch at trial %d", trial);
      return false;
    }
    checked += batch * out;
  }
  detail("%lld code comparisons exact (exhaustive + 1000 random layers)",
         static_cast<long long>(checked));
  return true;
}

// ---------------------------------------------------------------- criterion 3
bool exact_balance() {
  bq::Rng rng(1003);
  Tensor w = oracle::gaussian_tensor({10000}, rng);
  for (int k = 1; k <= 4; ++k) {
    const auto res = bq::balanced_quantize(w, k, bq::EqualizeMode::kExactPercentile);
    std::vector<int64_t> counts(static_cast<size_t>(1) << k, 0);
    for (uint8_t c : res.quantized.codes) ++counts[c];
    int64_t mn = counts[0], mx = counts[0];
    for (int64_t c : counts) {
      mn = std::min(mn, c);
      mx = std::max(mx, c);
    }
    if (mx - mn > 1) {
      detail("k=%d count spread %lld", k, static_cast<long long>(mx - mn));
      return false;
    }
    const double eb = bq::effective_bitwidth(res.quantized);
    if (eb < k - 0.001) {
      detail("k=%d eb=%.6f", k, eb);
      return false;
    }
  }
  detail("per-code spread <= 1 and EB >= k-0.001 for k in {1,2,3,4}");
  return true;
}

// ------------------------------------------------------------ criteria 4 and 5
struct RecursiveTrials {
  bool bound_ok = true;
  bool distinct_ok = true;
  bool gap_ok = true;
  bool mallows_ok = true;
  double worst_gap = 0.0;
  int vacuous = 0;
  std::string fail;
};

RecursiveTrials run_recursive_trials() {
  RecursiveTrials out;
  bq::Rng rng(1004);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(0, 2));
    // sizes large enough that sampling noise does not swamp the 0.05 EB gap
    const int64_t n = rng.uniform_int(1024, 4096);
    const int dist = trial % 3;  // 0 gaussian, 1 exponential, 2 heavy mixture
    Tensor w({n});
    for (double& v : w.data())
      v = dist == 0   ? rng.normal()
          : dist == 1 ? rng.exponential()
                      : (rng.uniform() < 0.9 ? rng.normal() : rng.normal(0.0, 20.0));

    double ebs[2] = {0.0, 0.0};
    for (int mi = 0; mi < 2; ++mi) {
      const auto mode = mi == 0 ? bq::EqualizeMode::kRecursiveMean : bq::EqualizeMode::kRecursiveMedian;
      const bq::BalanceReport rep = bq::verify_balance_bound(w, k, mode);
      if (!rep.holds) {
        out.bound_ok = false;
        out.fail = "bound violated at trial " + std::to_string(trial);
      }
      if (!rep.leaves_distinct || !rep.codes_consistent) {
        out.distinct_ok = false;
        out.fail = "leaf distinctness violated at trial " + std::to_string(trial);
      }
      if (std::isinf(rep.gamma)) ++out.vacuous;

      const auto res = bq::balanced_quantize(w, k, mode);
      ebs[mi] = bq::effective_bitwidth(res.quantized);

      bq::RecursiveTrace trace;
      bq::recursive_equalize(w, k,
                             mi == 0 ? bq::ThresholdMode::kMean : bq::ThresholdMode::kMedian,
                             &trace);
      for (const auto& s : trace.splits)
        if (std::fabs(s.mean - s.median) > s.stddev + 1e-12) {
          out.mallows_ok = false;
          out.fail = "mean-median gap exceeded stddev at trial " + std::to_string(trial);
        }
    }
    if (dist == 0) {
      const double gap = std::fabs(ebs[0] - ebs[1]);
      out.worst_gap = std::max(out.worst_gap, gap);
      if (gap > 0.05) {
        out.gap_ok = false;
        out.fail = "EB gap " + std::to_string(gap) + " at trial " + std::to_string(trial);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- criterion 6
bool grad_close(const Tensor& analytic, const Tensor& numeric, int64_t* counter) {
  for (int64_t i = 0; i < analytic.size(); ++i) {
    ++*counter;
    if (std::fabs(analytic[i] - numeric[i]) > 1e-4 * (1.0 + std::fabs(numeric[i]))) return false;
  }
  return true;
}

bool gradient_correctness() {
  bq::Rng rng(1006);
  int64_t points = 0;

  // equalization backward at points >= 1e-3 from any threshold
  for (int rep = 0; rep < 4; ++rep) {
    Tensor w = oracle::gaussian_tensor({400}, rng);
    const bq::EqualizerSpec spec = bq::percentile_thresholds(w, 3);
    std::vector<double> pts;
    for (int64_t i = 0; i < w.size(); ++i) {
      double dmin = 1e9;
      for (double t : spec.thresholds) dmin = std::min(dmin, std::fabs(w[i] - t));
      if (dmin >= 1e-3) pts.push_back(w[i]);
    }
    Tensor x({static_cast<int64_t>(pts.size())}, pts);
    bq::Graph g;
    bq::NodeId xn = g.leaf(x);
    g.backward(g.sum(bq::equalize_node(g, xn, spec)));
    Tensor numeric = bq::numeric_gradient(
        [&](const Tensor& t) { return bq::sum(bq::equalize_exact(t, spec)); }, x);
    if (!grad_close(g.grad(xn), numeric, &points)) {
      detail("equalize_backward FD mismatch");
      return false;
    }
  }

  // every differentiable op at generic points
  for (int rep = 0; rep < 6; ++rep) {
    Tensor av = oracle::random_tensor({3, 4}, rng);
    Tensor bv = oracle::random_tensor({3, 4}, rng);
    Tensor mv = oracle::random_tensor({4, 3}, rng);
    Tensor rv = oracle::random_tensor({1, 4}, rng);
    bool ok = true;

    auto check_binary = [&](auto build, const Tensor& x0, const Tensor& y0) {
      bq::Graph g;
      bq::NodeId a = g.leaf(x0);
      bq::NodeId b = g.leaf(y0);
      g.backward(g.sum(build(g, a, b)));
      Tensor na = bq::numeric_gradient(
          [&](const Tensor& t) {
            bq::Graph h;
            return h.value(h.sum(build(h, h.leaf(t), h.constant(y0))))[0];
          },
          x0);
      Tensor nb = bq::numeric_gradient(
          [&](const Tensor& t) {
            bq::Graph h;
            return h.value(h.sum(build(h, h.constant(x0), h.leaf(t))))[0];
          },
          y0);
      ok = ok && grad_close(g.grad(a), na, &points) && grad_close(g.grad(b), nb, &points);
    };
    check_binary([](bq::Graph& g, bq::NodeId a, bq::NodeId b) { return g.add(a, b); }, av, bv);
    check_binary([](bq::Graph& g, bq::NodeId a, bq::NodeId b) { return g.hadamard(a, b); }, av, bv);
    check_binary([](bq::Graph& g, bq::NodeId a, bq::NodeId b) { return g.concat_cols(a, b); }, av,
                 bv);
    check_binary([](bq::Graph& g, bq::NodeId a, bq::NodeId b) { return g.matmul(a, b); }, av, mv);
    check_binary([](bq::Graph& g, bq::NodeId a, bq::NodeId b) { return g.add_rowvec(a, b); }, av,
                 rv);

    auto check_unary = [&](auto build, const Tensor& x0) {
      bq::Graph g;
      bq::NodeId a = g.leaf(x0);
      g.backward(g.sum(build(g, a)));
      Tensor na = bq::numeric_gradient(
          [&](const Tensor& t) {
            bq::Graph h;
            return h.value(h.sum(build(h, h.leaf(t))))[0];
          },
          x0);
      ok = ok && grad_close(g.grad(a), na, &points);
    };
    check_unary([](bq::Graph& g, bq::NodeId a) { return g.sigmoid(a); }, av);
    check_unary([](bq::Graph& g, bq::NodeId a) { return g.tanh(a); }, av);
    check_unary([](bq::Graph& g, bq::NodeId a) { return g.affine(a, 1.7, -0.3); }, av);
    if (!ok) {
      detail("autodiff op FD mismatch at rep %d", rep);
      return false;
    }
  }

  // STE nodes: incoming gradient passes through bit-identically
  for (int rep = 0; rep < 10; ++rep) {
    Tensor wv = oracle::gaussian_tensor({5, 5}, rng);
    Tensor cv = oracle::random_tensor({5, 5}, rng);
    for (int which = 0; which < 4; ++which) {
      bq::Graph g;
      bq::NodeId w = g.leaf(wv);
      bq::NodeId q;
      switch (which) {
        case 0: q = bq::ste_round_to_zero(g, w); break;
        case 1: {
          Tensor unit = wv;
          for (double& v : unit.data()) v = std::clamp(0.5 + 0.1 * v, 0.0, 1.0);
          bq::Graph g2;
          bq::NodeId w2 = g2.leaf(unit);
          bq::NodeId q2 = bq::ste_q_k(g2, w2, 3);
          g2.backward(g2.sum(g2.hadamard(q2, g2.constant(cv))));
          for (int64_t i = 0; i < unit.size(); ++i)
            if (g2.grad(w2)[i] != cv[i]) {
              detail("ste_q_k gradient not identical");
              return false;
            }
          continue;
        }
        case 2: q = bq::ste_quant_k(g, w, 2); break;
        default: q = bq::ste_balanced_quantize(g, w, 2, bq::EqualizeMode::kRecursiveMean); break;
      }
      g.backward(g.sum(g.hadamard(q, g.constant(cv))));
      for (int64_t i = 0; i < wv.size(); ++i)
        if (g.grad(w)[i] != cv[i]) {
          detail("STE gradient not identical (case %d)", which);
          return false;
        }
    }
  }

  detail("%lld FD point checks within 1e-4 relative; STE pass-through exact",
         static_cast<long long>(points));
  return points >= 1000;
}

// ---------------------------------------------------------------- criterion 7
bq::ModelSpec small_mlp(int64_t hidden, int bits, int a_bits, bq::QuantizerMode mode,
                        int classes) {
  bq::ModelSpec spec;
  spec.kind = bq::ModelKind::kMlp;
  spec.layers = {{2, hidden, bits, a_bits, mode, bq::Activation::kSigmoid},
                 {hidden, classes, bits, a_bits, mode, bq::Activation::kSigmoid}};
  return spec;
}

bool table2_trend() {
  double eb[2] = {0.0, 0.0};
  double acc[2] = {0.0, 0.0};
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    bq::DataSpec d;
    d.name = "blobs";
    d.n = 256;
    d.classes = 4;
    d.radius = 2.0;
    d.stddev = 0.45;
    d.seed = 100 + seed;
    const bq::TrainData data = bq::make_data(d);
    bq::DataSpec dt = d;
    dt.seed = 5000 + seed;
    dt.n = 1024;
    const bq::TrainData test = bq::make_data(dt);
    for (int mi = 0; mi < 2; ++mi) {
      const auto mode = mi == 0 ? bq::QuantizerMode::kBalancedExact : bq::QuantizerMode::kImbalanced;
      bq::TrainConfig cfg;
      cfg.epochs = 40;
      cfg.batch_size = 32;
      cfg.lr.base = 1.0;
      cfg.seed = seed;
      const bq::TrainResult res = bq::train(cfg, small_mlp(16, 2, 2, mode, 4), data);
      const bq::EvalResult ev = bq::evaluate(res.checkpoint, test, bq::EvalPath::kFloatReference);
      eb[mi] += res.log.back().mean_eb / 5.0;
      acc[mi] += ev.accuracy / 5.0;
    }
  }
  detail("balanced eb=%.4f acc=%.4f | imbalanced eb=%.4f acc=%.4f", eb[0], acc[0], eb[1], acc[1]);
  return eb[0] >= eb[1] && acc[0] >= acc[1] - 0.005;
}

// ---------------------------------------------------------------- criterion 8
bool conjecture_trend() {
  std::vector<double> ebs, accs;
  for (int bits : {1, 2, 4, 8}) {
    for (int mi = 0; mi < 2; ++mi) {
      const auto mode = mi == 0 ? bq::QuantizerMode::kBalancedExact : bq::QuantizerMode::kImbalanced;
      for (uint64_t seed = 1; seed <= 5; ++seed) {
        bq::DataSpec d;
        d.name = "blobs";
        d.n = 256;
        d.classes = 4;
        d.radius = 2.0;
        d.stddev = 0.35;
        d.seed = 2200 + seed;
        const bq::TrainData data = bq::make_data(d);
        bq::TrainConfig cfg;
        cfg.epochs = 100;
        cfg.batch_size = 32;
        cfg.lr.base = 0.5;
        cfg.seed = seed + 62;
        cfg.weight_decay = 1e-4;
        const bq::TrainResult res = bq::train(cfg, small_mlp(128, bits, 4, mode, 4), data);
        bq::DataSpec dt = d;
        dt.seed = 8888 + seed;
        dt.n = 2048;
        const bq::EvalResult ev =
            bq::evaluate(res.checkpoint, bq::make_data(dt), bq::EvalPath::kFloatReference);
        ebs.push_back(res.log.back().mean_eb);
        accs.push_back(ev.accuracy);
      }
    }
  }
  const double rho = bq::spearman(ebs, accs);
  detail("spearman(EB, accuracy) = %.4f over %zu runs", rho, ebs.size());
  return rho >= 0.0;
}

// ---------------------------------------------------------------- criterion 9
bool rnn_grid_discipline() {
  bq::Rng rng(1009);
  auto grid_weights = [&](int64_t rows, int64_t cols, int bits) {
    Tensor w({rows, cols});
    for (double& v : w.data()) v = rng.uniform(-1.0, 1.0);
    return bq::quant_k(w, bits);
  };
  auto on_unit_grid = [](const Tensor& t, int k) {
    const double d = static_cast<double>((1 << k) - 1);
    for (double v : t.data())
      if (v != std::round(v * d) / d) return false;
    return true;
  };

  for (int trial = 0; trial < 500; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(0, 3));
    const int wb = 1 + static_cast<int>(rng.uniform_int(0, 3));
    const int64_t hidden = rng.uniform_int(1, 6);
    const int64_t batch = rng.uniform_int(1, 4);

    Tensor h0({batch, hidden});
    for (double& v : h0.data()) v = rng.uniform();
    h0 = bq::q_k(h0, k);
    Tensor x({batch, 1});
    for (double& v : x.data()) v = static_cast<double>(rng.uniform_int(0, 1));

    {
      bq::Graph g;
      bq::GruWeights w;
      w.w_update = g.leaf(grid_weights(hidden + 1, hidden, wb));
      w.w_reset = g.leaf(grid_weights(hidden + 1, hidden, wb));
      w.w_candidate = g.leaf(grid_weights(hidden + 1, hidden, wb));
      w.weight_bits = wb;
      const auto res = bq::gru_step(g, g.constant(h0), g.constant(x), w, k);
      if (!on_unit_grid(g.value(res.h), k)) {
        detail("GRU state off grid at trial %d", trial);
        return false;
      }
      for (double v : g.value(res.pre_quant).data())
        if (v < 0.0 || v > 1.0) {
          detail("GRU pre-quantization state outside [0,1] at trial %d", trial);
          return false;
        }
    }
    {
      bq::Graph g;
      bq::LstmWeights w;
      w.w_forget = g.leaf(grid_weights(hidden + 1, hidden, wb));
      w.w_input = g.leaf(grid_weights(hidden + 1, hidden, wb));
      w.w_candidate = g.leaf(grid_weights(hidden + 1, hidden, wb));
      w.w_output = g.leaf(grid_weights(hidden + 1, hidden, wb));
      w.weight_bits = wb;
      Tensor c0({batch, hidden});
      for (double& v : c0.data()) v = rng.normal();
      const auto res = bq::lstm_step(g, g.constant(h0), g.constant(c0), g.constant(x), w, k);
      if (!on_unit_grid(g.value(res.h), k)) {
        detail("LSTM state off grid at trial %d", trial);
        return false;
      }
    }
  }
  detail("1000 cell steps on-grid, zero violations");
  return true;
}

// --------------------------------------------------------------- criterion 10
std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool determinism_and_persistence() {
  bq::DataSpec d;
  d.name = "blobs";
  d.n = 128;
  d.classes = 3;
  d.seed = 17;
  const bq::TrainData data = bq::make_data(d);
  bq::TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 32;
  cfg.lr.base = 1.0;
  cfg.seed = 99;
  const bq::ModelSpec spec = small_mlp(8, 2, 2, bq::QuantizerMode::kBalancedExact, 3);

  const bq::TrainResult a = bq::train(cfg, spec, data);
  const bq::TrainResult b = bq::train(cfg, spec, data);
  a.checkpoint.save("/tmp/bq_acc_a.ckpt");
  b.checkpoint.save("/tmp/bq_acc_b.ckpt");
  const bool same_train = file_bytes("/tmp/bq_acc_a.ckpt") == file_bytes("/tmp/bq_acc_b.ckpt");

  const bq::Checkpoint loaded = bq::Checkpoint::load("/tmp/bq_acc_a.ckpt");
  loaded.save("/tmp/bq_acc_c.ckpt");
  const bool same_io = file_bytes("/tmp/bq_acc_a.ckpt") == file_bytes("/tmp/bq_acc_c.ckpt");

  std::remove("/tmp/bq_acc_a.ckpt");
  std::remove("/tmp/bq_acc_b.ckpt");
  std::remove("/tmp/bq_acc_c.ckpt");
  detail("train repeat byte-identical: %s; save/load/save byte-identical: %s",
         same_train ? "yes" : "no", same_io ? "yes" : "no");
  return same_train && same_io;
}

}  // namespace

int main() {
  int failures = 0;
  int id = 0;
  RecursiveTrials rec;  // shared by criteria 4 and 5

  const struct {
    const char* name;
    std::function<bool()> run;
  } criteria[] = {
      {"bit-kernel exactness vs integer oracle", bit_kernel_exactness},
      {"fixed-point inference equivalence", fixed_inference_equivalence},
      {"exact balance of percentile quantization", exact_balance},
      {"recursive-partitioning balance bound",
       [&] {
         rec = run_recursive_trials();
         if (rec.bound_ok && rec.distinct_ok)
           detail("1000 trials x 2 modes hold (%d vacuous empty-split trials reported)",
                  rec.vacuous);
         else
           detail("%s", rec.fail.c_str());
         return rec.bound_ok && rec.distinct_ok;
       }},
      {"mean-median validity",
       [&] {
         if (rec.gap_ok && rec.mallows_ok)
           detail("worst Gaussian EB gap %.4f <= 0.05; |mean-median| <= stddev everywhere",
                  rec.worst_gap);
         else
           detail("%s", rec.fail.c_str());
         return rec.gap_ok && rec.mallows_ok;
       }},
      {"gradient correctness", gradient_correctness},
      {"balanced vs imbalanced 2-bit trend", table2_trend},
      {"bitwidth-utilization vs accuracy trend", conjecture_trend},
      {"recurrent cell grid discipline", rnn_grid_discipline},
      {"determinism and persistence", determinism_and_persistence},
  };

  for (const auto& c : criteria) {
    ++id;
    g_detail.clear();
    bool ok = false;
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      detail("exception: %s", e.what());
    }
    std::printf("[%2d/10] %s  %s (%s)\n", id, ok ? "PASS" : "FAIL", c.name, g_detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures;
}
