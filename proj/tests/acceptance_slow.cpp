// Desk-scale acceptance tier: one criterion per invocation, selected by
// argv[1] (9..14); argv[2] is the directory holding the shipped configs.
// Datasets are looked up under RESTOCNET_DATA (default /root/data). Work
// products (preprocess caches, checkpoints, activations) land under
// acceptance_work/ in the current directory so reruns reuse what is
// content-addressed and retrain what is not.
//
// The full-split 100-epoch CIFAR classifier protocol from the configs is the
// long-running opt-in tier; the criteria below substitute the desk-scale
// classifier protocols stated in their printouts.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "restocnet/pipeline.hpp"

using namespace restocnet;

namespace {

bool report(int criterion, bool pass, const std::string& detail) {
  std::printf("CRITERION %d %s: %s\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  return pass;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void note(const char* fmt, ...) {
  std::va_list args;
  va_start(args, fmt);
  std::vprintf(fmt, args);
  va_end(args);
  std::printf("\n");
  std::fflush(stdout);
}

std::string pct(double accuracy) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * accuracy);
  return buf;
}

ExperimentConfig load_cfg(const std::string& configs_dir,
                          const std::string& name) {
  ExperimentConfig cfg =
      parse_experiment(Config::load(configs_dir + "/" + name + ".cfg"));
  const char* env = std::getenv("RESTOCNET_DATA");
  cfg.data_dir = std::string(env != nullptr ? env : "/root/data") + "/" +
                 cfg.dataset;
  cfg.out_dir = "acceptance_work/" + cfg.name;
  cfg.cache_dir =
      cfg.dataset == "cifar10" ? "acceptance_work/cache" : cfg.out_dir;
  return cfg;
}

/// Layer-wise STDP training of every conv layer, with stage timings.
Checkpoint train_convnet(const ExperimentConfig& cfg, const DataBundle& data) {
  std::vector<WeightBank> banks = init_banks(
      cfg, data.train.images.c, data.train.images.h, data.train.images.w);
  for (std::size_t l = 0; l < cfg.topology.layers.size(); ++l) {
    const auto t0 = std::chrono::steady_clock::now();
    train_layer(cfg, banks, l, data.train, 1);
    note("  [%s] conv layer %zu trained in %.0f s", cfg.name.c_str(), l,
         seconds_since(t0));
  }
  return make_checkpoint(cfg, banks);
}

/// Feature extraction + classifier head per the config's counts and epochs.
double classify(const ExperimentConfig& cfg, const DataBundle& data,
                const Checkpoint& ckpt) {
  const NetworkRunner runner =
      make_runner(cfg, ckpt.banks, data.train.images.c, data.train.images.h,
                  data.train.images.w);
  auto t0 = std::chrono::steady_clock::now();
  const ActivationSet train_acts =
      ensure_activations(cfg, runner, ckpt, data.train, "train",
                         kStreamFeaturesTrain, cfg.cls_train_count, 1);
  const ActivationSet test_acts =
      ensure_activations(cfg, runner, ckpt, data.test, "test",
                         kStreamFeaturesTest, cfg.cls_test_count, 1);
  note("  [%s] activations ready in %.0f s (train %zu, test %zu, dim %zu)",
       cfg.name.c_str(), seconds_since(t0), train_acts.count,
       test_acts.count, train_acts.dim);
  t0 = std::chrono::steady_clock::now();
  const ClassifierRun run = run_classifier(cfg, train_acts, test_acts);
  note("  [%s] classifier: %zu epochs in %.0f s, test accuracy %s",
       cfg.name.c_str(), run.history.size(), seconds_since(t0),
       pct(run.test_accuracy).c_str());
  return run.test_accuracy;
}

// --- 9. Fully-connected SNN baseline and window-layout comparison ----------

bool criterion9(const std::string& configs) {
  const ExperimentConfig cfg = load_cfg(configs, "fcsnn_mnist");
  const DataBundle data = prepare_data(cfg, 1);

  const auto t0 = std::chrono::steady_clock::now();
  const FcsnnRun hb = run_fcsnn_experiment(cfg, data, 1);
  const double hb_seconds = seconds_since(t0);
  note("  [fcsnn] HB: accuracy %s, %zu/%zu neurons tagged, %.0f s",
       pct(hb.accuracy).c_str(), hb.tagged, cfg.fcsnn.num_neurons,
       hb_seconds);

  ExperimentConfig cfg2 = cfg;
  cfg2.fcsnn.window.layout = StdpLayout::HB2;
  const FcsnnRun hb2 = run_fcsnn_experiment(cfg2, data, 1);
  note("  [fcsnn] HB2: accuracy %s", pct(hb2.accuracy).c_str());

  ExperimentConfig cfg3 = cfg;
  cfg3.fcsnn.window.layout = StdpLayout::HB3;
  const FcsnnRun hb3 = run_fcsnn_experiment(cfg3, data, 1);
  note("  [fcsnn] HB3: accuracy %s", pct(hb3.accuracy).c_str());

  const bool pass = hb.accuracy >= 0.72 && hb_seconds <= 7200.0 &&
                    hb.accuracy >= hb2.accuracy + 0.05 &&
                    hb.accuracy >= hb3.accuracy + 0.05;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "HB %s in %.0f s (need >= 72%%, <= 7200 s); HB2 %s, HB3 %s "
                "(need HB ahead by >= 5 points)",
                pct(hb.accuracy).c_str(), hb_seconds,
                pct(hb2.accuracy).c_str(), pct(hb3.accuracy).c_str());
  return report(9, pass, buf);
}

// --- 10. Small MNIST network, full and reduced classifier protocols --------

bool criterion10(const std::string& configs) {
  const ExperimentConfig cfg = load_cfg(configs, "mnist_16c3");
  const DataBundle data = prepare_data(cfg, 1);
  const Checkpoint ckpt = train_convnet(cfg, data);

  const double full = classify(cfg, data, ckpt);

  ExperimentConfig reduced = cfg;
  reduced.cls_epochs = 20;
  reduced.cls_train_count = 10000;
  reduced.cls_test_count = 2000;
  const double quick = classify(reduced, data, ckpt);

  const bool pass = full >= 0.93 && quick >= 0.90;
  return report(10, pass,
                "full protocol " + pct(full) + " (need >= 93%); reduced "
                "10k/2k 20-epoch protocol " + pct(quick) + " (need >= 90%)");
}

// --- 11. Larger MNIST network ------------------------------------------------

bool criterion11(const std::string& configs) {
  const ExperimentConfig cfg = load_cfg(configs, "mnist_36c3_128fc");
  const DataBundle data = prepare_data(cfg, 1);
  const auto t0 = std::chrono::steady_clock::now();
  const Checkpoint ckpt = train_convnet(cfg, data);
  const double acc = classify(cfg, data, ckpt);
  const double total = seconds_since(t0);
  char buf[120];
  std::snprintf(buf, sizeof buf, "%s in %.0f s end to end (need >= 97.5%%)",
                pct(acc).c_str(), total);
  return report(11, acc >= 0.975, buf);
}

// --- 12. CIFAR-10 single-conv network vs untrained-kernel ablation ----------

bool criterion12(const std::string& configs) {
  ExperimentConfig cfg = load_cfg(configs, "cifar_restocnet1");
  cfg.cls_train_count = 20000;  // desk-scale classifier protocol
  cfg.cls_test_count = 0;       // full test split
  cfg.cls_epochs = 30;
  const DataBundle data = prepare_data(cfg, 1);

  const Checkpoint trained = train_convnet(cfg, data);
  note("  [r1] trained-kernel run:");
  const double acc = classify(cfg, data, trained);

  // Ablation: freshly initialized kernels, thresholds left at zero, same
  // classifier protocol on the same splits.
  const Checkpoint untrained = make_checkpoint(
      cfg, init_banks(cfg, data.train.images.c, data.train.images.h,
                      data.train.images.w));
  note("  [r1] random-kernel / zero-threshold ablation:");
  const double ablation = classify(cfg, data, untrained);

  const bool pass = acc >= 0.61 && acc >= ablation + 0.03;
  return report(12, pass,
                "trained " + pct(acc) + " (need >= 61%); ablation " +
                    pct(ablation) + " (need trained ahead by >= 3 points)");
}

// --- 13. Depth-3 shortcut ablation ------------------------------------------

bool criterion13(const std::string& configs) {
  double acc[2] = {0.0, 0.0};
  const char* names[2] = {"cifar_restocnet3a", "cifar_restocnet3b"};
  for (int i = 0; i < 2; ++i) {
    ExperimentConfig cfg = load_cfg(configs, names[i]);
    cfg.cls_train_count = 15000;  // desk-scale classifier protocol
    cfg.cls_test_count = 0;
    cfg.cls_epochs = 30;
    const DataBundle data = prepare_data(cfg, 1);
    const Checkpoint ckpt = train_convnet(cfg, data);
    acc[i] = classify(cfg, data, ckpt);
  }
  const bool pass = acc[1] >= acc[0] + 0.10;
  return report(13, pass,
                "with shortcut " + pct(acc[1]) + ", without " + pct(acc[0]) +
                    " on third-layer features (need gap >= 10 points)");
}

// --- 14. Learning-stride sensitivity -----------------------------------------

bool criterion14(const std::string& configs) {
  const std::size_t strides[3] = {1, 5, 25};
  double acc[3] = {0.0, 0.0, 0.0};
  for (int i = 0; i < 3; ++i) {
    ExperimentConfig cfg = load_cfg(configs, "cifar_restocnet1");
    cfg.name = "r1_stride" + std::to_string(strides[i]);
    cfg.out_dir = "acceptance_work/" + cfg.name;
    cfg.stdp_stride = strides[i];
    cfg.stdp_iterations = 50;     // reduced-scale runs
    cfg.cls_train_count = 10000;
    cfg.cls_test_count = 5000;
    cfg.cls_epochs = 20;
    const DataBundle data = prepare_data(cfg, 1);
    const Checkpoint ckpt = train_convnet(cfg, data);
    acc[i] = classify(cfg, data, ckpt);
  }
  const bool pass = acc[1] > acc[0] && acc[1] > acc[2];
  return report(14, pass,
                "stride 1: " + pct(acc[0]) + ", stride 5: " + pct(acc[1]) +
                    ", stride 25: " + pct(acc[2]) +
                    " (need the middle stride on top)");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <criterion 9..14> <configs-dir>\n",
                 argv[0]);
    return 2;
  }
  const int n = std::atoi(argv[1]);
  const std::string configs = argv[2];
  try {
    switch (n) {
      case 9: return criterion9(configs) ? 0 : 1;
      case 10: return criterion10(configs) ? 0 : 1;
      case 11: return criterion11(configs) ? 0 : 1;
      case 12: return criterion12(configs) ? 0 : 1;
      case 13: return criterion13(configs) ? 0 : 1;
      case 14: return criterion14(configs) ? 0 : 1;
      default:
        std::fprintf(stderr, "unknown criterion %d\n", n);
        return 2;
    }
  } catch (const std::exception& e) {
    std::printf("CRITERION %d FAIL: exception: %s\n", n, e.what());
    return 1;
  }
}
