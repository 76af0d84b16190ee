// Command-line front end for the restocnet library: dataset preprocessing,
// layer-wise STDP training, classifier training, evaluation, FC-SNN runs,
// and report/export utilities. Every stochastic phase derives from the
// single experiment seed, which is echoed to stdout and stored in outputs.
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "restocnet/pgm.hpp"
#include "restocnet/pipeline.hpp"

namespace {

using namespace restocnet;

struct CommonArgs {
  std::string config_path;
  std::string out_override;
  long long seed_override = -1;
  unsigned workers = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  CLI::Option* opt =
      cmd->add_option("--config", args.config_path, "experiment config file");
  if (config_required) opt->required();
  cmd->add_option("--seed", args.seed_override,
                  "override the experiment seed");
  cmd->add_option("--out", args.out_override, "override the output directory");
  cmd->add_option("--workers", args.workers, "worker thread count")
      ->check(CLI::Range(1u, 256u));
}

ExperimentConfig load_experiment(const CommonArgs& args) {
  ExperimentConfig cfg = parse_experiment(Config::load(args.config_path));
  if (args.seed_override >= 0)
    cfg.seed = static_cast<std::uint64_t>(args.seed_override);
  if (!args.out_override.empty()) {
    if (cfg.cache_dir == cfg.out_dir) cfg.cache_dir = args.out_override;
    cfg.out_dir = args.out_override;
  }
  return cfg;
}

void print_seed(const ExperimentConfig& cfg) {
  std::printf("experiment %s: effective seed %llu\n", cfg.name.c_str(),
              static_cast<unsigned long long>(cfg.seed));
}

Checkpoint load_or_init(const ExperimentConfig& cfg, const DataBundle& data) {
  const std::string path = checkpoint_path(cfg);
  if (file_exists(path)) {
    Checkpoint ckpt = load_checkpoint(path);
    require(ckpt.topology == cfg.topology_text, ErrorClass::State,
            "checkpoint topology does not match the config");
    return ckpt;
  }
  return make_checkpoint(
      cfg, init_banks(cfg, data.train.images.c, data.train.images.h,
                      data.train.images.w));
}

int cmd_preprocess(const CommonArgs& args) {
  const ExperimentConfig cfg = load_experiment(args);
  print_seed(cfg);
  const DataBundle data = prepare_data(cfg, args.workers);
  std::printf("train: %zu images %zux%zux%zu, test: %zu images\n",
              data.train.count(), data.train.images.c, data.train.images.h,
              data.train.images.w, data.test.count());
  return 0;
}

int cmd_train_conv(const CommonArgs& args, long long layer) {
  ExperimentConfig cfg = load_experiment(args);
  print_seed(cfg);
  const DataBundle data = prepare_data(cfg, args.workers);
  Checkpoint ckpt = load_or_init(cfg, data);
  std::vector<std::size_t> layers;
  if (layer < 0)
    for (std::size_t l = 0; l < cfg.topology.layers.size(); ++l)
      layers.push_back(l);
  else
    layers.push_back(static_cast<std::size_t>(layer));
  for (const std::size_t l : layers) {
    std::printf("training conv layer %zu (%zu iterations, batch %zu)\n", l,
                cfg.stdp_iterations, cfg.stdp_batch);
    train_layer(cfg, ckpt.banks, l, data.train, args.workers);
  }
  ensure_dir(cfg.out_dir);
  save_checkpoint(ckpt, checkpoint_path(cfg));
  std::printf("checkpoint: %s\n", checkpoint_path(cfg).c_str());
  return 0;
}

int cmd_train_fc(const CommonArgs& args) {
  ExperimentConfig cfg = load_experiment(args);
  print_seed(cfg);
  const DataBundle data = prepare_data(cfg, args.workers);
  Checkpoint ckpt = load_checkpoint(checkpoint_path(cfg));
  require(ckpt.topology == cfg.topology_text, ErrorClass::State,
          "checkpoint topology does not match the config");
  const NetworkRunner runner = make_runner(cfg, ckpt.banks,
                                           data.train.images.c,
                                           data.train.images.h,
                                           data.train.images.w);
  const ActivationSet train_acts =
      ensure_activations(cfg, runner, ckpt, data.train, "train",
                         kStreamFeaturesTrain, cfg.cls_train_count,
                         args.workers);
  const ActivationSet test_acts =
      ensure_activations(cfg, runner, ckpt, data.test, "test",
                         kStreamFeaturesTest, cfg.cls_test_count,
                         args.workers);
  const std::string log_path = cfg.out_dir + "/" + cfg.name + ".metrics.csv";
  const ClassifierRun run = run_classifier(cfg, train_acts, test_acts,
                                           log_path);
  ckpt.classifier = run.layers;
  save_checkpoint(ckpt, checkpoint_path(cfg));
  std::printf("classifier: %zu epochs, final test accuracy %.4f\n",
              run.history.size(), run.test_accuracy);
  std::printf("metrics: %s\n", log_path.c_str());
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  const ExperimentConfig cfg = load_experiment(args);
  print_seed(cfg);
  const DataBundle data = prepare_data(cfg, args.workers);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path(cfg));
  require(!ckpt.classifier.empty(), ErrorClass::State,
          "checkpoint has no trained classifier");
  const NetworkRunner runner = make_runner(cfg, ckpt.banks,
                                           data.test.images.c,
                                           data.test.images.h,
                                           data.test.images.w);
  const ActivationSet test_acts =
      ensure_activations(cfg, runner, ckpt, data.test, "test",
                         kStreamFeaturesTest, cfg.cls_test_count,
                         args.workers);
  Mlp<float> net(test_acts.dim, cfg.topology.classifier_dims, cfg.seed);
  net.load_checkpoint(ckpt.classifier);
  const std::vector<int> preds = classifier_predictions(net, test_acts);
  const AccuracyReport report = evaluate_accuracy(preds, test_acts.labels);
  std::printf("test accuracy: %.4f (%zu / %zu)\n", report.accuracy,
              report.correct, report.total);

  const std::string path = cfg.out_dir + "/" + cfg.name + ".eval.csv";
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), ErrorClass::Io, "cannot write report: " + path);
  out << "# seed=" << cfg.seed << "\n";
  out << "accuracy," << report.accuracy << "\n";
  out << "label,guess,count\n";
  for (int l = 0; l < 10; ++l)
    for (int g = 0; g < 10; ++g)
      if (report.confusion[l][g])
        out << l << "," << g << "," << report.confusion[l][g] << "\n";
  require(out.good(), ErrorClass::Io, "write failure: " + path);
  std::printf("report: %s\n", path.c_str());
  return 0;
}

int cmd_report_compression(const CommonArgs& args, const std::string& csv) {
  std::vector<CompressionRow> rows = standard_compression_rows();
  std::uint64_t seed = 0;
  if (!args.config_path.empty()) {
    const ExperimentConfig cfg = load_experiment(args);
    seed = cfg.seed;
    // Per-experiment row: trained kernels vs a 32-bit kernel bank of the
    // same geometry (pure storage accounting, independent of training).
    for (std::size_t l = 0; l < cfg.topology.layers.size(); ++l) {
      const ConvLayerSpec& layer = cfg.topology.layers[l];
      rows.push_back({cfg.name + " layer " + std::to_string(l) +
                          " vs full-precision same shape",
                      kernel_compression(layer.maps, layer.kernel, layer.maps,
                                         layer.kernel)});
    }
  }
  std::printf("%-44s %10s %8s\n", "comparison", "exact", "ratio");
  for (const CompressionRow& row : rows)
    std::printf("%-44s %6llu/%-4llu %7sx\n", row.label.c_str(),
                static_cast<unsigned long long>(row.report.num),
                static_cast<unsigned long long>(row.report.den),
                row.report.decimal_text().c_str());
  if (!csv.empty()) {
    std::ofstream out(csv, std::ios::trunc);
    require(out.good(), ErrorClass::Io, "cannot write report: " + csv);
    out << "# seed=" << seed << "\n";
    out << "comparison,numerator,denominator,ratio\n";
    for (const CompressionRow& row : rows)
      out << row.label << "," << row.report.num << "," << row.report.den
          << "," << row.report.decimal_text() << "\n";
    require(out.good(), ErrorClass::Io, "write failure: " + csv);
    std::printf("report: %s\n", csv.c_str());
  }
  return 0;
}

int cmd_export_kernels(const CommonArgs& args) {
  const ExperimentConfig cfg = load_experiment(args);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path(cfg));
  ensure_dir(cfg.out_dir);
  for (std::size_t l = 0; l < ckpt.banks.size(); ++l) {
    const WeightBank& bank = ckpt.banks[l];
    const std::string path =
        cfg.out_dir + "/" + cfg.name + ".layer" + std::to_string(l) + ".pgm";
    const std::size_t row = bank.in * bank.height * bank.width;
    std::size_t side = 1;
    while (side * side < row) ++side;
    if (bank.height == 1 && bank.width == 1 && side * side == row)
      export_receptive_fields_pgm(bank, side, path);
    else
      export_bank_pgm(bank, path);
    std::printf("kernels: %s\n", path.c_str());
  }
  return 0;
}

int cmd_export_activations(const CommonArgs& args, const std::string& split,
                           long long count) {
  const ExperimentConfig cfg = load_experiment(args);
  print_seed(cfg);
  const DataBundle data = prepare_data(cfg, args.workers);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path(cfg));
  const LabeledImageSet& set = split == "train" ? data.train : data.test;
  const std::uint16_t stream =
      split == "train" ? kStreamFeaturesTrain : kStreamFeaturesTest;
  const NetworkRunner runner = make_runner(cfg, ckpt.banks, set.images.c,
                                           set.images.h, set.images.w);
  const std::size_t n = count < 0 ? (split == "train" ? cfg.cls_train_count
                                                      : cfg.cls_test_count)
                                  : static_cast<std::size_t>(count);
  const ActivationSet acts = ensure_activations(cfg, runner, ckpt, set, split,
                                                stream, n, args.workers);
  std::printf("%s activations: %zu rows x %zu features\n", split.c_str(),
              acts.count, acts.dim);
  return 0;
}

int cmd_run_fcsnn(const CommonArgs& args) {
  const ExperimentConfig cfg = load_experiment(args);
  print_seed(cfg);
  const DataBundle data = prepare_data(cfg, args.workers);
  const FcsnnRun run = run_fcsnn_experiment(cfg, data, args.workers);
  std::printf("fcsnn: %zu tagged neurons, test accuracy %.4f\n", run.tagged,
              run.accuracy);
  ensure_dir(cfg.out_dir);
  Checkpoint ckpt;
  ckpt.seed = cfg.seed;
  ckpt.topology = "fcsnn";
  ckpt.banks.push_back(run.bank);
  const std::string path = cfg.out_dir + "/" + cfg.name + ".fcsnn.ckpt";
  save_checkpoint(ckpt, path);
  const std::string csv = cfg.out_dir + "/" + cfg.name + ".fcsnn.csv";
  std::ofstream out(csv, std::ios::trunc);
  require(out.good(), ErrorClass::Io, "cannot write report: " + csv);
  out << "# seed=" << cfg.seed << "\n";
  out << "accuracy,tagged\n" << run.accuracy << "," << run.tagged << "\n";
  require(out.good(), ErrorClass::Io, "write failure: " + csv);
  std::printf("checkpoint: %s\nreport: %s\n", path.c_str(), csv.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"restocnet: stochastic binary spiking networks"};
  app.require_subcommand(1);

  CommonArgs preprocess_args, conv_args, fc_args, eval_args, report_args,
      kernels_args, acts_args, fcsnn_args;
  long long conv_layer = -1;
  std::string report_csv, acts_split = "test";
  long long acts_count = -1;

  add_common(app.add_subcommand("preprocess", "load and preprocess datasets"),
             preprocess_args);
  CLI::App* conv = app.add_subcommand(
      "train-conv", "layer-wise STDP training of convolution kernels");
  add_common(conv, conv_args);
  conv->add_option("--layer", conv_layer,
                   "conv layer to train (default: all, in order)");
  add_common(app.add_subcommand("train-fc",
                                "train the classifier head on activations"),
             fc_args);
  add_common(app.add_subcommand("eval", "evaluate the trained classifier"),
             eval_args);
  CLI::App* report = app.add_subcommand("report-compression",
                                        "memory compression ratios");
  add_common(report, report_args, /*config_required=*/false);
  report->add_option("--csv", report_csv, "also write a CSV report");
  add_common(app.add_subcommand("export-kernels",
                                "export kernel banks as PGM tiles"),
             kernels_args);
  CLI::App* acts = app.add_subcommand("export-activations",
                                      "export spiking activation features");
  add_common(acts, acts_args);
  acts->add_option("--split", acts_split, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  acts->add_option("--count", acts_count, "image count (default from config)");
  add_common(app.add_subcommand("run-fcsnn",
                                "train/tag/evaluate the fully-connected SNN"),
             fcsnn_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("preprocess")) return cmd_preprocess(preprocess_args);
    if (app.got_subcommand("train-conv"))
      return cmd_train_conv(conv_args, conv_layer);
    if (app.got_subcommand("train-fc")) return cmd_train_fc(fc_args);
    if (app.got_subcommand("eval")) return cmd_eval(eval_args);
    if (app.got_subcommand("report-compression"))
      return cmd_report_compression(report_args, report_csv);
    if (app.got_subcommand("export-kernels"))
      return cmd_export_kernels(kernels_args);
    if (app.got_subcommand("export-activations"))
      return cmd_export_activations(acts_args, acts_split, acts_count);
    if (app.got_subcommand("run-fcsnn")) return cmd_run_fcsnn(fcsnn_args);
  } catch (const restocnet::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
