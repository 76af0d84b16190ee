#ifndef RESTOCNET_PIPELINE_HPP
#define RESTOCNET_PIPELINE_HPP

#include <cinttypes>
#include <cstdio>
#include <string>
#include <vector>

#include "restocnet/activation_io.hpp"
#include "restocnet/cache.hpp"
#include "restocnet/checkpoint.hpp"
#include "restocnet/cifar10.hpp"
#include "restocnet/classifier.hpp"
#include "restocnet/config.hpp"
#include "restocnet/convnet.hpp"
#include "restocnet/fcsnn.hpp"
#include "restocnet/metrics.hpp"
#include "restocnet/mnist.hpp"
#include "restocnet/preprocess.hpp"

namespace restocnet {

/// Which slice of the training split a conv layer learns from, and the
/// encoder ceiling used while it learns (deeper layers use a hotter input).
struct LayerTrainSpec {
  std::size_t offset = 0;
  std::size_t count = 2000;
  double max_rate = 200.0;
};

/// Full experiment description; round-trips through the config text format.
struct ExperimentConfig {
  std::string name = "experiment";
  std::string dataset = "mnist";  // mnist | cifar10
  std::string data_dir = "data";
  std::string out_dir = "out";
  std::string cache_dir;  // preprocessed-tensor cache; defaults to out_dir
  std::uint64_t seed = 0;
  PolarityMode polarity = PolarityMode::Unsigned;

  bool gcn = false, zca = false;
  double zca_epsilon = 0.01;

  std::string topology_text = "16C3-2P-10FC";
  NetworkTopology topology;  // derived: parse_topology + per-layer sections

  std::size_t stdp_batch = 200;
  std::size_t stdp_iterations = 100;
  std::size_t stdp_stride = 5;
  double stdp_t_window = 0.025;
  double p_drop = 0.5;
  bool full_precision = false;
  double fp_learning_rate = 0.01;
  std::vector<LayerTrainSpec> layer_train;  // one per conv layer

  std::size_t cls_epochs = 100;
  std::size_t cls_batch = 256;
  double cls_lr = 1.5e-3;
  double cls_beta1 = 0.9, cls_beta2 = 0.999, cls_eps = 1e-8;
  double cls_dropout = 0.5;
  std::size_t cls_train_count = 0, cls_test_count = 0;  // 0 = whole split
  std::vector<int> feature_layers;                      // empty = all layers

  FcsnnConfig fcsnn;
  std::size_t fcsnn_epochs = 1;
  std::size_t fcsnn_train_count = 3500;
  std::size_t fcsnn_tag_count = 0;   // 0 = reuse the training subset
  std::size_t fcsnn_test_count = 0;  // 0 = whole test split
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline StdpLayout parse_layout(const std::string& text) {
  if (text == "HB") return StdpLayout::HB;
  if (text == "HB2") return StdpLayout::HB2;
  if (text == "HB3") return StdpLayout::HB3;
  fail(ErrorClass::Config, "unknown STDP layout: " + text);
}

inline std::string layout_name(StdpLayout layout) {
  switch (layout) {
    case StdpLayout::HB: return "HB";
    case StdpLayout::HB2: return "HB2";
    case StdpLayout::HB3: return "HB3";
  }
  fail(ErrorClass::Config, "bad layout enum");
}

inline std::vector<ResidualSource> parse_residuals(const std::string& text) {
  std::vector<ResidualSource> out;
  for (const std::string& item : split_list(text)) {
    ResidualSource src;
    std::string head = item;
    const std::size_t colon = item.find(':');
    if (colon != std::string::npos) {
      head = item.substr(0, colon);
      const std::string flag = item.substr(colon + 1);
      require(flag == "inverted", ErrorClass::Config,
              "bad residual flag: " + item);
      src.invert = true;
    }
    if (head == "input") {
      src.layer = -1;
    } else {
      char* end = nullptr;
      const long v = std::strtol(head.c_str(), &end, 10);
      require(end != head.c_str() && *end == '\0' && v >= 0,
              ErrorClass::Config, "bad residual source: " + item);
      src.layer = static_cast<int>(v);
    }
    out.push_back(src);
  }
  return out;
}

inline std::string serialize_residuals(const std::vector<ResidualSource>& rs) {
  std::string out;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (i) out += ", ";
    out += rs[i].layer < 0 ? "input" : std::to_string(rs[i].layer);
    if (rs[i].invert) out += ":inverted";
  }
  return out;
}

inline std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const std::string& item : split_list(text))
    out.push_back(static_cast<int>(std::strtol(item.c_str(), nullptr, 10)));
  return out;
}

inline std::string serialize_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_experiment(const Config& c) {
  ExperimentConfig e;
  e.name = c.get_string("experiment", "name", e.name);
  e.dataset = c.get_string("experiment", "dataset", e.dataset);
  require(e.dataset == "mnist" || e.dataset == "cifar10", ErrorClass::Config,
          "dataset must be mnist or cifar10");
  e.data_dir = c.get_string("experiment", "data_dir", e.data_dir);
  e.out_dir = c.get_string("experiment", "out_dir", e.out_dir);
  e.cache_dir = c.get_string("experiment", "cache_dir", e.out_dir);
  e.seed = static_cast<std::uint64_t>(c.get_int("experiment", "seed", 0));
  const std::string pol =
      c.get_string("experiment", "polarity",
                   e.dataset == "cifar10" ? "signed" : "unsigned");
  require(pol == "unsigned" || pol == "signed", ErrorClass::Config,
          "polarity must be unsigned or signed");
  e.polarity =
      pol == "signed" ? PolarityMode::Signed : PolarityMode::Unsigned;

  e.gcn = c.get_bool("preprocess", "gcn", e.dataset == "cifar10");
  e.zca = c.get_bool("preprocess", "zca", e.dataset == "cifar10");
  e.zca_epsilon = c.get_double("preprocess", "epsilon", e.zca_epsilon);

  e.topology_text = c.get_string("experiment", "topology", e.topology_text);
  e.topology = parse_topology(e.topology_text);
  e.topology.dt = c.get_double("encoder", "dt", e.topology.dt);
  e.topology.t_sim = c.get_double("encoder", "t_sim", e.topology.t_sim);
  e.topology.tau_lpf = c.get_double("encoder", "tau_lpf", e.topology.tau_lpf);
  e.topology.tau_mem = c.get_double("encoder", "tau_mem", e.topology.tau_mem);
  e.topology.max_rate =
      c.get_double("encoder", "max_rate", e.topology.max_rate);

  e.stdp_batch =
      static_cast<std::size_t>(c.get_int("stdp", "batch", 200));
  e.stdp_iterations =
      static_cast<std::size_t>(c.get_int("stdp", "iterations", 100));
  e.stdp_stride = static_cast<std::size_t>(c.get_int("stdp", "stride", 5));
  e.stdp_t_window = c.get_double("stdp", "t_window", 0.025);
  e.p_drop = c.get_double("stdp", "p_drop", 0.5);
  e.full_precision = c.get_bool("stdp", "full_precision", false);
  e.fp_learning_rate = c.get_double("stdp", "learning_rate", 0.01);

  for (std::size_t l = 0; l < e.topology.layers.size(); ++l) {
    const std::string sec = "layer" + std::to_string(l);
    ConvLayerSpec& layer = e.topology.layers[l];
    layer.alpha_init = c.get_double(sec, "alpha", layer.alpha_init);
    layer.beta_thresh = c.get_double(sec, "beta", layer.beta_thresh);
    StdpWindowConfig& w = layer.window;
    w.layout = detail::parse_layout(c.get_string(sec, "layout", "HB"));
    w.pre_hebb_pot = c.get_double(sec, "pre_hebb_pot", w.pre_hebb_pot);
    w.pre_antihebb_dep =
        c.get_double(sec, "pre_antihebb_dep", w.pre_antihebb_dep);
    w.post_hebb_dep = c.get_double(sec, "post_hebb_dep", w.post_hebb_dep);
    w.p_hebb_pot = c.get_double(sec, "p_hebb_pot", w.p_hebb_pot);
    w.p_antihebb_dep = c.get_double(sec, "p_antihebb_dep", w.p_antihebb_dep);
    w.p_hebb_dep = c.get_double(sec, "p_hebb_dep", w.p_hebb_dep);
    layer.residuals =
        detail::parse_residuals(c.get_string(sec, "residuals", ""));
    LayerTrainSpec spec;
    spec.offset = static_cast<std::size_t>(c.get_int(sec, "train_offset", 0));
    spec.count = static_cast<std::size_t>(c.get_int(sec, "train_count", 2000));
    spec.max_rate = c.get_double(sec, "stdp_max_rate", 200.0);
    e.layer_train.push_back(spec);
  }

  e.cls_epochs =
      static_cast<std::size_t>(c.get_int("classifier", "epochs", 100));
  e.cls_batch = static_cast<std::size_t>(c.get_int("classifier", "batch", 256));
  e.cls_lr = c.get_double("classifier", "lr", 1.5e-3);
  e.cls_beta1 = c.get_double("classifier", "beta1", 0.9);
  e.cls_beta2 = c.get_double("classifier", "beta2", 0.999);
  e.cls_eps = c.get_double("classifier", "eps", 1e-8);
  e.cls_dropout = c.get_double("classifier", "dropout", 0.5);
  e.cls_train_count =
      static_cast<std::size_t>(c.get_int("classifier", "train_count", 0));
  e.cls_test_count =
      static_cast<std::size_t>(c.get_int("classifier", "test_count", 0));
  e.feature_layers = detail::parse_int_list(
      c.get_string("classifier", "feature_layers", ""));

  FcsnnConfig& f = e.fcsnn;
  f.num_neurons =
      static_cast<std::size_t>(c.get_int("fcsnn", "neurons", 400));
  f.dt = c.get_double("fcsnn", "dt", f.dt);
  f.duration = c.get_double("fcsnn", "duration", f.duration);
  f.max_rate = c.get_double("fcsnn", "max_rate", f.max_rate);
  f.tau_mem = c.get_double("fcsnn", "tau_mem", f.tau_mem);
  f.tau_trace = c.get_double("fcsnn", "tau_trace", f.tau_trace);
  f.refractory = c.get_double("fcsnn", "refractory", f.refractory);
  f.v_thresh = c.get_double("fcsnn", "v_thresh", f.v_thresh);
  f.theta_inc = c.get_double("fcsnn", "theta_inc", f.theta_inc);
  f.tau_theta = c.get_double("fcsnn", "tau_theta", f.tau_theta);
  f.inhibition = c.get_double("fcsnn", "inhibition", f.inhibition);
  f.min_potential = c.get_double("fcsnn", "min_potential", f.min_potential);
  f.window.layout =
      detail::parse_layout(c.get_string("fcsnn", "layout", "HB"));
  f.window.pre_hebb_pot =
      c.get_double("fcsnn", "pre_hebb_pot", f.window.pre_hebb_pot);
  f.window.pre_antihebb_dep =
      c.get_double("fcsnn", "pre_antihebb_dep", f.window.pre_antihebb_dep);
  f.window.post_hebb_dep =
      c.get_double("fcsnn", "post_hebb_dep", f.window.post_hebb_dep);
  f.window.p_hebb_pot = c.get_double("fcsnn", "p_hebb_pot", f.window.p_hebb_pot);
  f.window.p_antihebb_dep =
      c.get_double("fcsnn", "p_antihebb_dep", f.window.p_antihebb_dep);
  f.window.p_hebb_dep = c.get_double("fcsnn", "p_hebb_dep", f.window.p_hebb_dep);
  e.fcsnn_epochs = static_cast<std::size_t>(c.get_int("fcsnn", "epochs", 1));
  e.fcsnn_train_count =
      static_cast<std::size_t>(c.get_int("fcsnn", "train_count", 3500));
  e.fcsnn_tag_count =
      static_cast<std::size_t>(c.get_int("fcsnn", "tag_count", 0));
  e.fcsnn_test_count =
      static_cast<std::size_t>(c.get_int("fcsnn", "test_count", 0));
  return e;
}

inline Config experiment_to_config(const ExperimentConfig& e) {
  using detail::format_double;
  Config c;
  c.set("experiment", "name", e.name);
  c.set("experiment", "dataset", e.dataset);
  c.set("experiment", "data_dir", e.data_dir);
  c.set("experiment", "out_dir", e.out_dir);
  c.set("experiment", "cache_dir",
        e.cache_dir.empty() ? e.out_dir : e.cache_dir);
  c.set("experiment", "seed", std::to_string(e.seed));
  c.set("experiment", "polarity",
        e.polarity == PolarityMode::Signed ? "signed" : "unsigned");
  c.set("experiment", "topology", e.topology_text);

  c.set("preprocess", "gcn", e.gcn ? "true" : "false");
  c.set("preprocess", "zca", e.zca ? "true" : "false");
  c.set("preprocess", "epsilon", format_double(e.zca_epsilon));

  c.set("encoder", "dt", format_double(e.topology.dt));
  c.set("encoder", "t_sim", format_double(e.topology.t_sim));
  c.set("encoder", "tau_lpf", format_double(e.topology.tau_lpf));
  c.set("encoder", "tau_mem", format_double(e.topology.tau_mem));
  c.set("encoder", "max_rate", format_double(e.topology.max_rate));

  c.set("stdp", "batch", std::to_string(e.stdp_batch));
  c.set("stdp", "iterations", std::to_string(e.stdp_iterations));
  c.set("stdp", "stride", std::to_string(e.stdp_stride));
  c.set("stdp", "t_window", format_double(e.stdp_t_window));
  c.set("stdp", "p_drop", format_double(e.p_drop));
  c.set("stdp", "full_precision", e.full_precision ? "true" : "false");
  c.set("stdp", "learning_rate", format_double(e.fp_learning_rate));

  for (std::size_t l = 0; l < e.topology.layers.size(); ++l) {
    const std::string sec = "layer" + std::to_string(l);
    const ConvLayerSpec& layer = e.topology.layers[l];
    c.set(sec, "alpha", format_double(layer.alpha_init));
    c.set(sec, "beta", format_double(layer.beta_thresh));
    c.set(sec, "layout", detail::layout_name(layer.window.layout));
    c.set(sec, "pre_hebb_pot", format_double(layer.window.pre_hebb_pot));
    c.set(sec, "pre_antihebb_dep",
          format_double(layer.window.pre_antihebb_dep));
    c.set(sec, "post_hebb_dep", format_double(layer.window.post_hebb_dep));
    c.set(sec, "p_hebb_pot", format_double(layer.window.p_hebb_pot));
    c.set(sec, "p_antihebb_dep", format_double(layer.window.p_antihebb_dep));
    c.set(sec, "p_hebb_dep", format_double(layer.window.p_hebb_dep));
    c.set(sec, "residuals", detail::serialize_residuals(layer.residuals));
    c.set(sec, "train_offset", std::to_string(e.layer_train[l].offset));
    c.set(sec, "train_count", std::to_string(e.layer_train[l].count));
    c.set(sec, "stdp_max_rate", format_double(e.layer_train[l].max_rate));
  }

  c.set("classifier", "epochs", std::to_string(e.cls_epochs));
  c.set("classifier", "batch", std::to_string(e.cls_batch));
  c.set("classifier", "lr", format_double(e.cls_lr));
  c.set("classifier", "beta1", format_double(e.cls_beta1));
  c.set("classifier", "beta2", format_double(e.cls_beta2));
  c.set("classifier", "eps", format_double(e.cls_eps));
  c.set("classifier", "dropout", format_double(e.cls_dropout));
  c.set("classifier", "train_count", std::to_string(e.cls_train_count));
  c.set("classifier", "test_count", std::to_string(e.cls_test_count));
  c.set("classifier", "feature_layers",
        detail::serialize_int_list(e.feature_layers));

  const FcsnnConfig& f = e.fcsnn;
  c.set("fcsnn", "neurons", std::to_string(f.num_neurons));
  c.set("fcsnn", "dt", format_double(f.dt));
  c.set("fcsnn", "duration", format_double(f.duration));
  c.set("fcsnn", "max_rate", format_double(f.max_rate));
  c.set("fcsnn", "tau_mem", format_double(f.tau_mem));
  c.set("fcsnn", "tau_trace", format_double(f.tau_trace));
  c.set("fcsnn", "refractory", format_double(f.refractory));
  c.set("fcsnn", "v_thresh", format_double(f.v_thresh));
  c.set("fcsnn", "theta_inc", format_double(f.theta_inc));
  c.set("fcsnn", "tau_theta", format_double(f.tau_theta));
  c.set("fcsnn", "inhibition", format_double(f.inhibition));
  c.set("fcsnn", "min_potential", format_double(f.min_potential));
  c.set("fcsnn", "layout", detail::layout_name(f.window.layout));
  c.set("fcsnn", "pre_hebb_pot", format_double(f.window.pre_hebb_pot));
  c.set("fcsnn", "pre_antihebb_dep",
        format_double(f.window.pre_antihebb_dep));
  c.set("fcsnn", "post_hebb_dep", format_double(f.window.post_hebb_dep));
  c.set("fcsnn", "p_hebb_pot", format_double(f.window.p_hebb_pot));
  c.set("fcsnn", "p_antihebb_dep", format_double(f.window.p_antihebb_dep));
  c.set("fcsnn", "p_hebb_dep", format_double(f.window.p_hebb_dep));
  c.set("fcsnn", "epochs", std::to_string(e.fcsnn_epochs));
  c.set("fcsnn", "train_count", std::to_string(e.fcsnn_train_count));
  c.set("fcsnn", "tag_count", std::to_string(e.fcsnn_tag_count));
  c.set("fcsnn", "test_count", std::to_string(e.fcsnn_test_count));
  return c;
}

struct DataBundle {
  LabeledImageSet train, test;
};

/// Loads both splits and applies the configured preprocessing. Preprocessed
/// CIFAR tensors are cached under out_dir because the whitening fit is the
/// most expensive one-time step in the pipeline.
inline DataBundle prepare_data(const ExperimentConfig& cfg, unsigned workers,
                               bool use_cache = true) {
  DataBundle data;
  if (cfg.dataset == "mnist") {
    data.train = load_mnist(cfg.data_dir, "train");
    data.test = load_mnist(cfg.data_dir, "test");
  } else {
    data.train = load_cifar10(cfg.data_dir, "train");
    data.test = load_cifar10(cfg.data_dir, "test");
  }
  if (!cfg.gcn && !cfg.zca) return data;
  require(cfg.gcn || !cfg.zca, ErrorClass::Config,
          "whitening requires contrast normalization first");

  const std::string cache_dir =
      cfg.cache_dir.empty() ? cfg.out_dir : cfg.cache_dir;
  char suffix[48];
  std::snprintf(suffix, sizeof suffix, "%s%s_%g.rstp", cfg.gcn ? "_gcn" : "",
                cfg.zca ? "_zca" : "", cfg.zca ? cfg.zca_epsilon : 0.0);
  const std::string train_cache =
      cache_dir + "/" + cfg.dataset + "_train" + suffix;
  const std::string test_cache =
      cache_dir + "/" + cfg.dataset + "_test" + suffix;
  if (use_cache && file_exists(train_cache) && file_exists(test_cache)) {
    Tensor4<float> train_t = load_tensor_cache(train_cache);
    Tensor4<float> test_t = load_tensor_cache(test_cache);
    require(train_t.n == data.train.count() && test_t.n == data.test.count(),
            ErrorClass::State, "preprocess cache does not match the dataset");
    data.train.images = std::move(train_t);
    data.test.images = std::move(test_t);
    return data;
  }

  const GcnStats stats = gcn_fit(data.train);
  gcn_apply(stats, data.train);
  gcn_apply(stats, data.test);
  if (cfg.zca) {
    const ZcaModel model =
        zca_fit(data.train, stats, cfg.zca_epsilon, workers);
    zca_apply(model, data.train);
    zca_apply(model, data.test);
  }
  if (use_cache) {
    ensure_dir(cache_dir);
    save_tensor_cache(data.train.images, train_cache);
    save_tensor_cache(data.test.images, test_cache);
  }
  return data;
}

/// Fresh kernel banks per the config (binary by default, real-valued for
/// the full-precision ablation).
inline std::vector<WeightBank> init_banks(const ExperimentConfig& cfg,
                                          std::size_t channels,
                                          std::size_t height,
                                          std::size_t width) {
  const std::vector<LayerGeometry> geoms =
      compute_geometry(cfg.topology, channels, height, width);
  std::vector<WeightBank> banks;
  for (std::size_t l = 0; l < cfg.topology.layers.size(); ++l) {
    const std::uint16_t id = static_cast<std::uint16_t>(l);
    banks.push_back(cfg.full_precision
                        ? init_kernels_real(cfg.topology.layers[l],
                                            geoms[l].in_maps, cfg.seed, id)
                        : init_kernels(cfg.topology.layers[l],
                                       geoms[l].in_maps, cfg.seed, id));
  }
  return banks;
}

/// Unsupervised STDP training of conv layer L on its configured train slice.
inline void train_layer(const ExperimentConfig& cfg,
                        std::vector<WeightBank>& banks, std::size_t L,
                        const LabeledImageSet& train, unsigned workers) {
  require(L < cfg.layer_train.size(), ErrorClass::Config,
          "layer id outside the topology");
  const LayerTrainSpec& spec = cfg.layer_train[L];
  require(spec.offset < train.count(), ErrorClass::Config,
          "layer training slice starts past the dataset");
  const std::size_t count =
      std::min(spec.count, train.count() - spec.offset);
  std::vector<std::size_t> subset(count);
  for (std::size_t i = 0; i < count; ++i) subset[i] = spec.offset + i;

  TrainConvParams params;
  params.batch = cfg.stdp_batch;
  params.iterations = cfg.stdp_iterations;
  params.stride = cfg.stdp_stride;
  params.p_drop = cfg.p_drop;
  params.encoder.max_rate = spec.max_rate;
  params.encoder.dt = cfg.topology.dt;
  params.encoder.duration = cfg.stdp_t_window;
  params.encoder.mode = cfg.polarity;
  params.learning_rate = cfg.fp_learning_rate;
  params.seed = cfg.seed;
  params.workers = workers;
  train_conv_layer(cfg.topology, banks, L, train, subset, params);
}

inline std::string checkpoint_path(const ExperimentConfig& cfg) {
  return cfg.out_dir + "/" + cfg.name + ".ckpt";
}

inline NetworkRunner make_runner(const ExperimentConfig& cfg,
                                 const std::vector<WeightBank>& banks,
                                 std::size_t channels, std::size_t height,
                                 std::size_t width) {
  return NetworkRunner(cfg.topology, banks, channels, height, width,
                       cfg.polarity, cfg.seed);
}

inline Checkpoint make_checkpoint(const ExperimentConfig& cfg,
                                  const std::vector<WeightBank>& banks,
                                  std::vector<ClassifierLayer> classifier = {}) {
  Checkpoint ckpt;
  ckpt.seed = cfg.seed;
  ckpt.topology = cfg.topology_text;
  ckpt.banks = banks;
  ckpt.classifier = std::move(classifier);
  return ckpt;
}

/// Encoder streams per pipeline stage; conv STDP uses 100 + layer id.
enum : std::uint16_t {
  kStreamFeaturesTrain = 1,
  kStreamFeaturesTest = 2,
  kStreamFcsnnTag = 180,
  kStreamFcsnnEval = 190,
  kStreamFcsnnTrainBase = 200,
};

/// Pooled LPF activations for the first `count` images (0 = all), cached on
/// disk keyed by the checkpoint content so stale kernels never leak in.
inline ActivationSet ensure_activations(const ExperimentConfig& cfg,
                                        const NetworkRunner& runner,
                                        const Checkpoint& ckpt,
                                        const LabeledImageSet& set,
                                        const std::string& split,
                                        std::uint16_t stream,
                                        std::size_t count, unsigned workers,
                                        bool use_cache = true) {
  LabeledImageSet subset;
  const std::size_t n = count == 0 ? set.count() : std::min(count, set.count());
  if (n == set.count()) {
    subset = set;
  } else {
    subset.images = Tensor4<float>(n, set.images.c, set.images.h, set.images.w);
    std::copy(set.images.data.begin(),
              set.images.data.begin() +
                  static_cast<std::ptrdiff_t>(n * set.images.image_size()),
              subset.images.data.begin());
    subset.labels.assign(set.labels.begin(),
                         set.labels.begin() + static_cast<std::ptrdiff_t>(n));
  }

  std::string base;
  if (use_cache) {
    const std::vector<unsigned char> blob = serialize_checkpoint(ckpt);
    char tag[16];
    std::snprintf(tag, sizeof tag, "%08x",
                  crc32(blob.data(), blob.size()));
    base = cfg.out_dir + "/" + cfg.name + "." + split + "." + tag + "." +
           std::to_string(n);
    if (file_exists(base + ".rsta") && file_exists(base + ".labels.csv"))
      return load_activations(base + ".rsta", base + ".labels.csv");
  }
  ActivationSet acts = extract_activations(runner, subset, stream,
                                           cfg.feature_layers, workers);
  if (use_cache) {
    ensure_dir(cfg.out_dir);
    save_activations(acts, base + ".rsta", base + ".labels.csv");
  }
  return acts;
}

struct ClassifierRun {
  std::vector<EpochStats> history;
  double test_accuracy = 0.0;
  std::vector<ClassifierLayer> layers;
};

/// Trains the configured classifier head on extracted activations and
/// reports final test accuracy; per-epoch stats land in `<name>.metrics.csv`.
inline ClassifierRun run_classifier(const ExperimentConfig& cfg,
                                    const ActivationSet& train,
                                    const ActivationSet& test,
                                    const std::string& log_path = "") {
  Mlp<float> net(train.dim, cfg.topology.classifier_dims, cfg.seed);
  TrainClassifierParams params;
  params.epochs = cfg.cls_epochs;
  params.batch = cfg.cls_batch;
  params.lr = cfg.cls_lr;
  params.beta1 = cfg.cls_beta1;
  params.beta2 = cfg.cls_beta2;
  params.eps = cfg.cls_eps;
  params.dropout = cfg.cls_dropout;
  params.seed = cfg.seed;
  params.log_path = log_path;
  ClassifierRun run;
  run.history = train_classifier(net, train, &test, params);
  run.test_accuracy = classifier_accuracy(net, test);
  run.layers = net.to_checkpoint();
  return run;
}

inline std::vector<int> classifier_predictions(const Mlp<float>& net,
                                               const ActivationSet& data) {
  std::vector<int> out(data.count);
  const std::size_t chunk = 1024;
  for (std::size_t base = 0; base < data.count; base += chunk) {
    const std::size_t rows = std::min(chunk, data.count - base);
    RowMatrix<float> x(rows, data.dim);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < data.dim; ++c)
        x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            data.row(base + r)[c];
    const RowMatrix<float> logits = net.forward(x);
    for (std::size_t r = 0; r < rows; ++r) {
      Eigen::Index best;
      logits.row(static_cast<Eigen::Index>(r)).maxCoeff(&best);
      out[base + r] = static_cast<int>(best);
    }
  }
  return out;
}

struct FcsnnRun {
  double accuracy = 0.0;
  std::size_t tagged = 0;
  WeightBank bank;
};

/// FC-SNN pipeline: STDP training, neuron tagging, test-set evaluation.
inline FcsnnRun run_fcsnn_experiment(const ExperimentConfig& cfg,
                                     const DataBundle& data,
                                     unsigned workers) {
  ExperimentConfig local = cfg;
  local.fcsnn.num_inputs = data.train.images.image_size();
  FcsnnNetwork net(local.fcsnn, cfg.seed);

  const std::size_t train_n =
      std::min(cfg.fcsnn_train_count == 0 ? data.train.count()
                                          : cfg.fcsnn_train_count,
               data.train.count());
  std::vector<std::size_t> train_idx(train_n);
  for (std::size_t i = 0; i < train_n; ++i) train_idx[i] = i;

  TrainFcsnnParams tp;
  tp.epochs = cfg.fcsnn_epochs;
  tp.stream_base = kStreamFcsnnTrainBase;
  train_fcsnn(net, data.train, train_idx, tp);

  const std::size_t tag_n =
      cfg.fcsnn_tag_count == 0
          ? train_n
          : std::min(cfg.fcsnn_tag_count, data.train.count());
  std::vector<std::size_t> tag_idx(tag_n);
  for (std::size_t i = 0; i < tag_n; ++i) tag_idx[i] = i;
  tag_neurons(net, data.train, tag_idx, kStreamFcsnnTag, workers);

  const std::size_t test_n =
      std::min(cfg.fcsnn_test_count == 0 ? data.test.count()
                                         : cfg.fcsnn_test_count,
               data.test.count());
  std::vector<std::size_t> test_idx(test_n);
  for (std::size_t i = 0; i < test_n; ++i) test_idx[i] = i;

  FcsnnRun run;
  run.accuracy =
      evaluate_fcsnn(net, data.test, test_idx, kStreamFcsnnEval, workers);
  for (const int t : net.tags())
    if (t >= 0) ++run.tagged;
  run.bank = net.to_bank();
  return run;
}

struct CompressionRow {
  std::string label;
  CompressionReport report;
};

/// The paper's three headline memory-compression comparisons.
inline std::vector<CompressionRow> standard_compression_rows() {
  return {
      {"fc 1600x32b vs 6400x1b synapses", synaptic_compression(1600, 6400, 784)},
      {"conv 32x5x5x32b vs 36x3x3x2b", kernel_compression(32, 5, 36, 3)},
      {"conv 64x7x7x32b vs 256x3x3x2b", kernel_compression(64, 7, 256, 3)},
  };
}

}  // namespace restocnet

#endif  // RESTOCNET_PIPELINE_HPP
