#ifndef RESTOCNET_CONVNET_HPP
#define RESTOCNET_CONVNET_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "restocnet/activation_io.hpp"
#include "restocnet/checkpoint.hpp"
#include "restocnet/encoding.hpp"
#include "restocnet/error.hpp"
#include "restocnet/neurons.hpp"
#include "restocnet/parallel.hpp"
#include "restocnet/plasticity.hpp"
#include "restocnet/rng.hpp"
#include "restocnet/tensor.hpp"

namespace restocnet {

/// Identity shortcut feeding a later layer; layer -1 is the network input.
struct ResidualSource {
  int layer = -1;
  bool invert = false;
};

struct ConvLayerSpec {
  std::size_t maps = 36;
  std::size_t kernel = 3;
  std::vector<ResidualSource> residuals;
  StdpWindowConfig window;  // excitatory semantics; the inhibitory rule mirrors it
  double beta_thresh = 6e-4;
  double alpha_init = 75.0;
};

struct PoolingSpec {
  std::size_t window = 2;  // non-overlapping window, stride = window
  double theta = 0.80;
};

struct NetworkTopology {
  std::vector<ConvLayerSpec> layers;
  PoolingSpec pooling;
  // Activation-estimation parameters for classifier-facing forward passes.
  double t_sim = 0.1;       // seconds
  double tau_lpf = 0.0995;  // seconds
  double tau_mem = 0.0095;  // seconds
  double dt = 1e-3;         // seconds
  double max_rate = 500.0;  // spikes/second at full drive
  std::vector<std::size_t> classifier_dims;  // hidden sizes..., output width
};

/// Parses topology strings like "36C3-36C3-2P-1024FC-10FC": conv layers,
/// one pooling token, then the classifier stack (last FC is the output).
inline NetworkTopology parse_topology(const std::string& text) {
  require(!text.empty(), ErrorClass::Config, "empty topology string");
  NetworkTopology topo;
  bool saw_pool = false, saw_fc = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('-', start), text.size());
    const std::string token = text.substr(start, end - start);
    start = end + 1;
    require(!token.empty(), ErrorClass::Config,
            "empty token in topology \"" + text + "\"");
    std::size_t i = 0;
    while (i < token.size() && std::isdigit(static_cast<unsigned char>(token[i])))
      ++i;
    require(i > 0, ErrorClass::Config,
            "malformed topology token \"" + token + "\"");
    const std::size_t number = std::stoul(token.substr(0, i));
    const std::string tail = token.substr(i);
    if (tail == "FC") {
      require(!topo.layers.empty(), ErrorClass::Config,
              "classifier layer before any conv layer in \"" + text + "\"");
      topo.classifier_dims.push_back(number);
      saw_fc = true;
    } else if (tail == "P") {
      require(!topo.layers.empty(), ErrorClass::Config,
              "pooling before any conv layer in \"" + text + "\"");
      require(!saw_pool, ErrorClass::Config,
              "multiple pooling tokens in \"" + text + "\"");
      require(!saw_fc, ErrorClass::Config,
              "pooling after classifier layers in \"" + text + "\"");
      require(number >= 1, ErrorClass::Config, "pooling window must be >= 1");
      topo.pooling.window = number;
      saw_pool = true;
    } else if (!tail.empty() && tail[0] == 'C') {
      require(!saw_fc && !saw_pool, ErrorClass::Config,
              "conv layer after pooling/classifier in \"" + text + "\"");
      std::size_t j = 1;
      while (j < tail.size() &&
             std::isdigit(static_cast<unsigned char>(tail[j])))
        ++j;
      require(j == tail.size() && j > 1, ErrorClass::Config,
              "malformed topology token \"" + token + "\"");
      ConvLayerSpec layer;
      layer.maps = number;
      layer.kernel = std::stoul(tail.substr(1));
      require(layer.maps >= 1 && layer.kernel >= 1, ErrorClass::Config,
              "conv layers need at least one map and a positive kernel");
      topo.layers.push_back(layer);
    } else {
      fail(ErrorClass::Config, "malformed topology token \"" + token + "\"");
    }
    if (end == text.size()) break;
  }
  require(!topo.layers.empty(), ErrorClass::Config,
          "topology \"" + text + "\" has no conv layer");
  require(saw_fc, ErrorClass::Config,
          "topology \"" + text + "\" has no classifier layer");
  return topo;
}

inline std::string serialize_topology(const NetworkTopology& topo) {
  std::string out;
  for (const ConvLayerSpec& layer : topo.layers)
    out += std::to_string(layer.maps) + "C" + std::to_string(layer.kernel) + "-";
  out += std::to_string(topo.pooling.window) + "P";
  for (const std::size_t dim : topo.classifier_dims)
    out += "-" + std::to_string(dim) + "FC";
  return out;
}

struct LayerGeometry {
  std::size_t in_maps, in_h, in_w, out_h, out_w, pooled_h, pooled_w;
};

inline std::vector<LayerGeometry> compute_geometry(const NetworkTopology& topo,
                                                   std::size_t channels,
                                                   std::size_t height,
                                                   std::size_t width) {
  std::vector<LayerGeometry> geoms;
  std::size_t c = channels, h = height, w = width;
  for (const ConvLayerSpec& layer : topo.layers) {
    require(h >= layer.kernel && w >= layer.kernel, ErrorClass::Dimension,
            "input smaller than kernel");
    LayerGeometry g;
    g.in_maps = c;
    g.in_h = h;
    g.in_w = w;
    g.out_h = h - layer.kernel + 1;
    g.out_w = w - layer.kernel + 1;
    g.pooled_h = g.out_h / topo.pooling.window;
    g.pooled_w = g.out_w / topo.pooling.window;
    require(g.pooled_h >= 1 && g.pooled_w >= 1, ErrorClass::Dimension,
            "pooling window larger than the conv output");
    geoms.push_back(g);
    c = layer.maps;
    h = g.out_h;
    w = g.out_w;
  }
  return geoms;
}

/// Concatenated activation length over the selected layers (empty = all).
inline std::size_t feature_length(const NetworkTopology& topo,
                                  const std::vector<LayerGeometry>& geoms,
                                  const std::vector<int>& feature_layers = {}) {
  std::size_t len = 0;
  for (std::size_t l = 0; l < topo.layers.size(); ++l) {
    if (!feature_layers.empty() &&
        std::find(feature_layers.begin(), feature_layers.end(),
                  static_cast<int>(l)) == feature_layers.end())
      continue;
    len += topo.layers[l].maps * geoms[l].pooled_h * geoms[l].pooled_w;
  }
  return len;
}

/// Bernoulli binary-kernel initialization: each weight is w_high with
/// p_high = sqrt(alpha / (fan_in + fan_out)), fans counted in synapses.
inline WeightBank init_kernels(const ConvLayerSpec& spec, std::size_t in_maps,
                               std::uint64_t seed, std::uint16_t layer_id) {
  const double fan_in = static_cast<double>(in_maps * spec.kernel * spec.kernel);
  const double fan_out = static_cast<double>(spec.maps * spec.kernel * spec.kernel);
  const double p_high = std::sqrt(spec.alpha_init / (fan_in + fan_out));
  require(spec.alpha_init > 0.0, ErrorClass::Config, "alpha must be positive");
  require(p_high <= 1.0, ErrorClass::Config,
          "alpha too large for this geometry: initialization probability "
          "exceeds 1");
  WeightBank bank;
  bank.out = static_cast<std::uint16_t>(spec.maps);
  bank.in = static_cast<std::uint16_t>(in_maps);
  bank.height = bank.width = static_cast<std::uint16_t>(spec.kernel);
  bank.bits.resize(bank.weight_count());
  for (std::size_t i = 0; i < bank.bits.size(); ++i)
    bank.bits[i] =
        rng::uniform_at(seed, rng::Phase::InitKernels, layer_id, 0, 0,
                   static_cast<std::uint32_t>(i)) < p_high
            ? 1
            : 0;
  bank.thresholds.assign(bank.out, 0.0f);
  return bank;
}

/// Full-precision variant for the ablation baseline: weights uniform in
/// [w_low, w_high].
inline WeightBank init_kernels_real(const ConvLayerSpec& spec,
                                    std::size_t in_maps, std::uint64_t seed,
                                    std::uint16_t layer_id) {
  WeightBank bank;
  bank.out = static_cast<std::uint16_t>(spec.maps);
  bank.in = static_cast<std::uint16_t>(in_maps);
  bank.height = bank.width = static_cast<std::uint16_t>(spec.kernel);
  bank.real_weights.resize(bank.weight_count());
  for (std::size_t i = 0; i < bank.real_weights.size(); ++i) {
    const double u = rng::uniform_at(seed, rng::Phase::InitKernels, layer_id, 0, 0,
                                static_cast<std::uint32_t>(i));
    bank.real_weights[i] =
        static_cast<float>(bank.w_low + u * (bank.w_high - bank.w_low));
  }
  bank.thresholds.assign(bank.out, 0.0f);
  return bank;
}

/// Kernel weights rearranged as [in][row][col][out] so that scattering one
/// input spike touches contiguous per-map lanes.
struct ScatterKernels {
  std::size_t in = 0, out = 0, k = 0;
  std::vector<float> w;
};

inline ScatterKernels build_scatter(const WeightBank& bank) {
  ScatterKernels kern;
  kern.in = bank.in;
  kern.out = bank.out;
  kern.k = bank.height;
  require(bank.height == bank.width, ErrorClass::Dimension,
          "kernels must be square");
  kern.w.resize(bank.weight_count());
  for (std::size_t i = 0; i < kern.in; ++i)
    for (std::size_t r = 0; r < kern.k; ++r)
      for (std::size_t c = 0; c < kern.k; ++c)
        for (std::size_t j = 0; j < kern.out; ++j)
          kern.w[((i * kern.k + r) * kern.k + c) * kern.out + j] =
              bank.value(j, i, r, c);
  return kern;
}

/// Event-driven accumulation of post-synaptic currents into an interleaved
/// (position-major, map-minor) buffer of size out_h*out_w*J. Skips zero
/// inputs, so cost scales with spike count.
inline void scatter_accumulate(const float* input, std::size_t in_maps,
                               std::size_t in_h, std::size_t in_w,
                               const ScatterKernels& kern, float* interleaved) {
  require(in_maps == kern.in, ErrorClass::Dimension,
          "input map count does not match kernels");
  require(in_h >= kern.k && in_w >= kern.k, ErrorClass::Dimension,
          "input smaller than kernel");
  const std::size_t out_h = in_h - kern.k + 1, out_w = in_w - kern.k + 1;
  const std::size_t J = kern.out, k = kern.k;
  std::fill(interleaved, interleaved + out_h * out_w * J, 0.0f);
  for (std::size_t i = 0; i < in_maps; ++i) {
    const float* plane = input + i * in_h * in_w;
    for (std::size_t y = 0; y < in_h; ++y) {
      const std::size_t r0 = y >= out_h ? y - out_h + 1 : 0;
      const std::size_t r1 = std::min(k - 1, y);
      for (std::size_t x = 0; x < in_w; ++x) {
        const float s = plane[y * in_w + x];
        if (s == 0.0f) continue;
        const std::size_t c0 = x >= out_w ? x - out_w + 1 : 0;
        const std::size_t c1 = std::min(k - 1, x);
        for (std::size_t r = r0; r <= r1; ++r)
          for (std::size_t c = c0; c <= c1; ++c) {
            float* dst = interleaved + ((y - r) * out_w + (x - c)) * J;
            const float* col = kern.w.data() + ((i * k + r) * k + c) * J;
            for (std::size_t j = 0; j < J; ++j) dst[j] += s * col[j];
          }
      }
    }
  }
}

/// Valid correlation of signed spike maps with a kernel bank; plane-major
/// output J x out_h x out_w. This is the production path (event-driven
/// scatter) exposed with the natural layout.
inline void binary_conv2d(const float* input, std::size_t in_maps,
                          std::size_t in_h, std::size_t in_w,
                          const ScatterKernels& kern, float* out) {
  const std::size_t out_h = in_h - kern.k + 1, out_w = in_w - kern.k + 1;
  std::vector<float> interleaved(out_h * out_w * kern.out);
  scatter_accumulate(input, in_maps, in_h, in_w, kern, interleaved.data());
  for (std::size_t pos = 0; pos < out_h * out_w; ++pos)
    for (std::size_t j = 0; j < kern.out; ++j)
      out[j * out_h * out_w + pos] = interleaved[pos * kern.out + j];
}

struct ResidualSourceView {
  const float* maps = nullptr;
  std::size_t channels = 0, h = 0, w = 0;
  bool invert = false;
};

/// Sums the direct path with (optionally inverted, cyclically channel-
/// replicated, center-cropped) residual spike maps and clamps to unit
/// magnitude via the sign of the sum.
inline void residual_combine(const float* direct, std::size_t channels,
                             std::size_t h, std::size_t w,
                             const std::vector<ResidualSourceView>& sources,
                             float* out) {
  for (const ResidualSourceView& src : sources) {
    require(src.channels > 0, ErrorClass::Dimension, "empty residual source");
    require(src.h >= h && src.w >= w, ErrorClass::Dimension,
            "residual source spatially smaller than the direct path");
  }
  for (std::size_t ch = 0; ch < channels; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        float sum = direct[(ch * h + y) * w + x];
        for (const ResidualSourceView& src : sources) {
          const std::size_t oy = (src.h - h) / 2, ox = (src.w - w) / 2;
          const float v = src.maps[((ch % src.channels) * src.h + y + oy) *
                                       src.w +
                                   (x + ox)];
          sum += src.invert ? -v : v;
        }
        out[(ch * h + y) * w + x] = sum > 0.0f ? 1.0f : (sum < 0.0f ? -1.0f : 0.0f);
      }
}

/// Non-overlapping window average; odd trailing rows/columns are truncated.
inline void avg_pool_input(const float* spikes, std::size_t maps,
                           std::size_t h, std::size_t w, std::size_t window,
                           float* drive) {
  const std::size_t ph = h / window, pw = w / window;
  const float inv = 1.0f / static_cast<float>(window * window);
  for (std::size_t m = 0; m < maps; ++m)
    for (std::size_t py = 0; py < ph; ++py)
      for (std::size_t px = 0; px < pw; ++px) {
        float sum = 0.0f;
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx)
            sum += spikes[(m * h + py * window + dy) * w + px * window + dx];
        drive[(m * ph + py) * pw + px] = sum * inv;
      }
}

/// Activation of one pooled spike train: first-order low-pass filter state
/// at T divided by the duration in milliseconds (Eq. 5 units).
inline double lpf_activation(const std::vector<float>& spike_train, double dt,
                             double tau_lpf, double duration) {
  require(tau_lpf > 0.0 && dt > 0.0 && duration > 0.0, ErrorClass::Config,
          "LPF parameters must be positive");
  const double decay = std::exp(-dt / tau_lpf);
  double lpf = 0.0;
  for (const float s : spike_train) lpf = lpf * decay + s;
  return lpf / (duration * 1000.0);
}

namespace detail {

/// Fused conv + LIF advance over one layer for one step. Potentials and
/// currents are interleaved (position-major); emitted spikes land in plane
/// layout. Returns per-map spike counts added into `counts` when provided.
inline void conv_lif_step(const float* input, const LayerGeometry& g,
                          const ScatterKernels& kern,
                          const std::vector<double>& thresholds, double decay,
                          std::vector<float>& current,
                          std::vector<double>& potential, float* spikes,
                          std::uint64_t* counts = nullptr) {
  const std::size_t J = kern.out, map_size = g.out_h * g.out_w;
  scatter_accumulate(input, g.in_maps, g.in_h, g.in_w, kern, current.data());
  for (std::size_t pos = 0; pos < map_size; ++pos) {
    double* v = potential.data() + pos * J;
    const float* c = current.data() + pos * J;
    for (std::size_t j = 0; j < J; ++j) {
      double u = v[j] * decay + c[j];
      if (u > thresholds[j]) {
        spikes[j * map_size + pos] = 1.0f;
        u = 0.0;
        if (counts) ++counts[j];
      } else {
        spikes[j * map_size + pos] = 0.0f;
      }
      v[j] = u;
    }
  }
}

}  // namespace detail

/// Frozen-network execution: encodes an image, steps every conv layer with
/// residual combination, pools through IF neurons, low-pass filters the
/// pooled trains, and concatenates per-layer activations. Thread-safe for
/// concurrent run_image calls.
class NetworkRunner {
 public:
  NetworkRunner(const NetworkTopology& topo, const std::vector<WeightBank>& banks,
                std::size_t channels, std::size_t height, std::size_t width,
                PolarityMode mode, std::uint64_t seed)
      : topo_(topo),
        geoms_(compute_geometry(topo, channels, height, width)),
        mode_(mode),
        seed_(seed),
        channels_(channels),
        height_(height),
        width_(width) {
    require(banks.size() == topo.layers.size(), ErrorClass::State,
            "bank count does not match topology");
    decay_mem_ = std::exp(-topo.dt / topo.tau_mem);
    decay_lpf_ = std::exp(-topo.dt / topo.tau_lpf);
    for (std::size_t l = 0; l < banks.size(); ++l) {
      require(banks[l].out == topo.layers[l].maps &&
                  banks[l].in == geoms_[l].in_maps &&
                  banks[l].height == topo.layers[l].kernel,
              ErrorClass::State, "bank geometry does not match topology");
      require(banks[l].thresholds.size() == banks[l].out, ErrorClass::State,
              "untrained layer: thresholds missing");
      scatter_.push_back(build_scatter(banks[l]));
      thresholds_.emplace_back(banks[l].thresholds.begin(),
                               banks[l].thresholds.end());
    }
  }

  const std::vector<LayerGeometry>& geometry() const { return geoms_; }
  const NetworkTopology& topology() const { return topo_; }

  std::size_t steps() const {
    EncoderConfig cfg;
    cfg.max_rate = topo_.max_rate;
    cfg.dt = topo_.dt;
    cfg.duration = topo_.t_sim;
    return encoder_steps(cfg);
  }

  /// Concatenated activations over `feature_layers` (empty = all layers).
  std::vector<float> run_image(const float* pixels, std::uint32_t image_index,
                               std::uint16_t stream,
                               const std::vector<int>& feature_layers = {}) const {
    EncoderConfig cfg;
    cfg.max_rate = topo_.max_rate;
    cfg.dt = topo_.dt;
    cfg.duration = topo_.t_sim;
    cfg.mode = mode_;
    cfg.stream = stream;
    PoissonEncoder enc(cfg, seed_);
    enc.set_image(pixels, channels_ * height_ * width_, image_index);

    const std::size_t num_layers = topo_.layers.size();
    std::vector<float> input(channels_ * height_ * width_);
    std::vector<std::vector<float>> current(num_layers), spikes(num_layers),
        combined(num_layers), pool_spikes(num_layers), drive(num_layers);
    std::vector<std::vector<double>> potential(num_layers), pool_v(num_layers),
        lpf(num_layers);
    for (std::size_t l = 0; l < num_layers; ++l) {
      const LayerGeometry& g = geoms_[l];
      const std::size_t J = topo_.layers[l].maps;
      current[l].resize(g.out_h * g.out_w * J);
      potential[l].assign(g.out_h * g.out_w * J, 0.0);
      spikes[l].resize(J * g.out_h * g.out_w);
      if (!topo_.layers[l].residuals.empty())
        combined[l].resize(g.in_maps * g.in_h * g.in_w);
      drive[l].resize(J * g.pooled_h * g.pooled_w);
      pool_v[l].assign(J * g.pooled_h * g.pooled_w, 0.0);
      pool_spikes[l].resize(J * g.pooled_h * g.pooled_w);
      lpf[l].assign(J * g.pooled_h * g.pooled_w, 0.0);
    }

    const std::size_t total_steps = enc.steps();
    for (std::size_t step = 0; step < total_steps; ++step) {
      enc.emit_step(static_cast<std::uint32_t>(step), input.data());
      const float* prev = input.data();
      for (std::size_t l = 0; l < num_layers; ++l) {
        const LayerGeometry& g = geoms_[l];
        const float* layer_input = prev;
        if (!topo_.layers[l].residuals.empty()) {
          residual_combine(prev, g.in_maps, g.in_h, g.in_w,
                           resolve_residuals(l, input, spikes),
                           combined[l].data());
          layer_input = combined[l].data();
        }
        detail::conv_lif_step(layer_input, g, scatter_[l], thresholds_[l],
                              decay_mem_, current[l], potential[l],
                              spikes[l].data());
        avg_pool_input(spikes[l].data(), topo_.layers[l].maps, g.out_h,
                       g.out_w, topo_.pooling.window, drive[l].data());
        if_pool_step(pool_v[l], drive[l].data(), topo_.pooling.theta,
                     pool_spikes[l].data());
        for (std::size_t k = 0; k < lpf[l].size(); ++k)
          lpf[l][k] = lpf[l][k] * decay_lpf_ + pool_spikes[l][k];
        prev = spikes[l].data();
      }
    }

    const double inv_t = 1.0 / (topo_.t_sim * 1000.0);
    std::vector<float> activations;
    activations.reserve(feature_length(topo_, geoms_, feature_layers));
    for (std::size_t l = 0; l < num_layers; ++l) {
      if (!feature_layers.empty() &&
          std::find(feature_layers.begin(), feature_layers.end(),
                    static_cast<int>(l)) == feature_layers.end())
        continue;
      for (const double v : lpf[l])
        activations.push_back(static_cast<float>(v * inv_t));
    }
    return activations;
  }

 private:
  std::vector<ResidualSourceView> resolve_residuals(
      std::size_t l, const std::vector<float>& input,
      const std::vector<std::vector<float>>& spikes) const {
    std::vector<ResidualSourceView> views;
    for (const ResidualSource& src : topo_.layers[l].residuals) {
      ResidualSourceView view;
      view.invert = src.invert;
      if (src.layer < 0) {
        view.maps = input.data();
        view.channels = channels_;
        view.h = height_;
        view.w = width_;
      } else {
        require(static_cast<std::size_t>(src.layer) < l, ErrorClass::Config,
                "residual source must precede its target layer");
        view.maps = spikes[src.layer].data();
        view.channels = topo_.layers[src.layer].maps;
        view.h = geoms_[src.layer].out_h;
        view.w = geoms_[src.layer].out_w;
      }
      views.push_back(view);
    }
    return views;
  }

  NetworkTopology topo_;
  std::vector<LayerGeometry> geoms_;
  PolarityMode mode_;
  std::uint64_t seed_;
  std::size_t channels_, height_, width_;
  double decay_mem_ = 0.0, decay_lpf_ = 0.0;
  std::vector<ScatterKernels> scatter_;
  std::vector<std::vector<double>> thresholds_;
};

/// Runs the frozen network over a whole split, producing one activation row
/// per image. Images are processed in parallel; each worker writes only its
/// own rows, so the result is worker-count invariant.
inline ActivationSet extract_activations(const NetworkRunner& runner,
                                         const LabeledImageSet& set,
                                         std::uint16_t stream,
                                         const std::vector<int>& feature_layers,
                                         unsigned workers) {
  ActivationSet out;
  out.count = set.count();
  out.dim = feature_length(runner.topology(), runner.geometry(), feature_layers);
  out.values.resize(out.count * out.dim);
  out.labels = set.labels;
  parallel_for(set.count(), workers, [&](std::size_t i) {
    const std::vector<float> row = runner.run_image(
        set.images.image(i), static_cast<std::uint32_t>(i), stream,
        feature_layers);
    require(row.size() == out.dim, ErrorClass::State,
            "activation length mismatch");
    std::copy(row.begin(), row.end(), out.values.begin() + i * out.dim);
  });
  return out;
}

struct TrainConvParams {
  std::size_t batch = 100;
  std::size_t iterations = 200;
  std::size_t stride = 5;
  double p_drop = 0.5;
  EncoderConfig encoder;  // STDP presentation window (T_STDP, STDP max rate)
  double learning_rate = 0.01;  // full-precision ablation only
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

/// Layer-wise unsupervised training of layer L: earlier layers run frozen,
/// layer L's kernels update every step via the mini-batch STDP rule and its
/// thresholds adapt once per iteration from spike counts summed over the
/// batch and all steps. Images are drawn from `subset` in order, cycling.
inline void train_conv_layer(const NetworkTopology& topo,
                             std::vector<WeightBank>& banks, std::size_t L,
                             const LabeledImageSet& set,
                             const std::vector<std::size_t>& subset,
                             const TrainConvParams& params) {
  require(L < topo.layers.size() && banks.size() == topo.layers.size(),
          ErrorClass::State, "layer id outside the topology");
  const std::vector<LayerGeometry> geoms = compute_geometry(
      topo, set.images.c, set.images.h, set.images.w);
  for (std::size_t l = 0; l < L; ++l)
    require(!banks[l].thresholds.empty() &&
                (banks[l].bits.size() == banks[l].weight_count() ||
                 banks[l].full_precision()),
            ErrorClass::State, "earlier layer untrained");
  WeightBank& bank = banks[L];
  const bool real_mode = bank.full_precision();
  const ConvLayerSpec& spec = topo.layers[L];
  const LayerGeometry& gL = geoms[L];
  const std::size_t J = spec.maps, map_size = gL.out_h * gL.out_w;
  const std::size_t in_plane = gL.in_h * gL.in_w;
  const std::size_t batch = std::min(params.batch, subset.size());
  validate_window(spec.window);
  StdpWindowConfig exc_window = spec.window;
  exc_window.polarity = Polarity::Excitatory;
  StdpWindowConfig inh_window = spec.window;
  inh_window.polarity = Polarity::Inhibitory;

  if (subset.empty() || params.iterations == 0) return;

  EncoderConfig enc_cfg = params.encoder;
  enc_cfg.stream = static_cast<std::uint16_t>(100 + L);
  const std::size_t steps = encoder_steps(enc_cfg);
  const double decay_mem = std::exp(-enc_cfg.dt / topo.tau_mem);
  const double decay_pre = std::exp(-enc_cfg.dt / 1.45e-3);

  std::vector<double> thresholds(bank.thresholds.begin(),
                                 bank.thresholds.end());
  std::vector<std::vector<double>> frozen_thresholds;
  std::vector<ScatterKernels> frozen_scatter;
  for (std::size_t l = 0; l < L; ++l) {
    frozen_scatter.push_back(build_scatter(banks[l]));
    frozen_thresholds.emplace_back(banks[l].thresholds.begin(),
                                   banks[l].thresholds.end());
  }

  struct ImageState {
    PoissonEncoder encoder;
    std::vector<float> input;
    std::vector<std::vector<float>> current, spikes, combined;
    std::vector<std::vector<double>> potential;
    std::vector<double> exc_traces, inh_traces;
    std::vector<std::uint64_t> counts;
    explicit ImageState(const EncoderConfig& cfg, std::uint64_t seed)
        : encoder(cfg, seed) {}
  };

  const bool signed_input = enc_cfg.mode == PolarityMode::Signed ||
                            std::any_of(topo.layers.begin(),
                                        topo.layers.begin() + L + 1,
                                        [](const ConvLayerSpec& s) {
                                          return !s.residuals.empty();
                                        }) ||
                            L > 0;

  std::vector<ImageState> states;
  states.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    states.emplace_back(enc_cfg, params.seed);
    ImageState& st = states.back();
    st.input.resize(set.images.image_size());
    st.current.resize(L + 1);
    st.spikes.resize(L + 1);
    st.combined.resize(L + 1);
    st.potential.resize(L + 1);
    for (std::size_t l = 0; l <= L; ++l) {
      const std::size_t n = topo.layers[l].maps * geoms[l].out_h * geoms[l].out_w;
      st.current[l].resize(n);
      st.spikes[l].resize(n);
      st.potential[l].resize(n);
      if (!topo.layers[l].residuals.empty())
        st.combined[l].resize(geoms[l].in_maps * geoms[l].in_h * geoms[l].in_w);
    }
    st.exc_traces.resize(gL.in_maps * in_plane);
    if (signed_input) st.inh_traces.resize(gL.in_maps * in_plane);
    st.counts.resize(J);
  }

  auto resolve_views = [&](ImageState& st, std::size_t l) {
    std::vector<ResidualSourceView> views;
    for (const ResidualSource& src : topo.layers[l].residuals) {
      ResidualSourceView view;
      view.invert = src.invert;
      if (src.layer < 0) {
        view.maps = st.input.data();
        view.channels = set.images.c;
        view.h = set.images.h;
        view.w = set.images.w;
      } else {
        require(static_cast<std::size_t>(src.layer) < l, ErrorClass::Config,
                "residual source must precede its target layer");
        view.maps = st.spikes[src.layer].data();
        view.channels = topo.layers[src.layer].maps;
        view.h = geoms[src.layer].out_h;
        view.w = geoms[src.layer].out_w;
      }
      views.push_back(view);
    }
    return views;
  };

  for (std::size_t it = 0; it < params.iterations; ++it) {
    const std::vector<std::uint8_t> active = draw_map_dropout(
        params.seed, static_cast<std::uint16_t>(L),
        static_cast<std::uint32_t>(it), J, params.p_drop);
    for (std::size_t b = 0; b < batch; ++b) {
      ImageState& st = states[b];
      const std::size_t idx = subset[(it * batch + b) % subset.size()];
      st.encoder.set_image(set.images.image(idx), set.images.image_size(),
                           static_cast<std::uint32_t>(idx));
      for (std::size_t l = 0; l <= L; ++l)
        std::fill(st.potential[l].begin(), st.potential[l].end(), 0.0);
      std::fill(st.exc_traces.begin(), st.exc_traces.end(), 0.0);
      std::fill(st.inh_traces.begin(), st.inh_traces.end(), 0.0);
      std::fill(st.counts.begin(), st.counts.end(), 0);
    }

    ScatterKernels kern = build_scatter(bank);
    for (std::size_t step = 0; step < steps; ++step) {
      parallel_for(batch, params.workers, [&](std::size_t b) {
        ImageState& st = states[b];
        st.encoder.emit_step(static_cast<std::uint32_t>(step),
                             st.input.data());
        const float* prev = st.input.data();
        for (std::size_t l = 0; l < L; ++l) {
          const float* in = prev;
          if (!topo.layers[l].residuals.empty()) {
            residual_combine(prev, geoms[l].in_maps, geoms[l].in_h,
                             geoms[l].in_w, resolve_views(st, l),
                             st.combined[l].data());
            in = st.combined[l].data();
          }
          detail::conv_lif_step(in, geoms[l], frozen_scatter[l],
                                frozen_thresholds[l], decay_mem,
                                st.current[l], st.potential[l],
                                st.spikes[l].data());
          prev = st.spikes[l].data();
        }
        const float* layer_input = prev;
        if (!spec.residuals.empty()) {
          residual_combine(prev, gL.in_maps, gL.in_h, gL.in_w,
                           resolve_views(st, L), st.combined[L].data());
          layer_input = st.combined[L].data();
        }
        step_traces(st.exc_traces, decay_pre, layer_input, 1.0f);
        if (!st.inh_traces.empty())
          step_traces(st.inh_traces, decay_pre, layer_input, -1.0f);
        detail::conv_lif_step(layer_input, gL, kern, thresholds, decay_mem,
                              st.current[L], st.potential[L],
                              st.spikes[L].data());
        for (std::size_t j = 0; j < J; ++j) {
          float* plane = st.spikes[L].data() + j * map_size;
          if (!active[j]) {
            std::fill(plane, plane + map_size, 0.0f);
            continue;
          }
          for (std::size_t p = 0; p < map_size; ++p)
            if (plane[p] != 0.0f) ++st.counts[j];
        }
      });

      std::vector<StdpBatchElement> views(batch);
      for (std::size_t b = 0; b < batch; ++b)
        views[b] = {states[b].spikes[L].data(), states[b].exc_traces.data(),
                    states[b].inh_traces.empty()
                        ? nullptr
                        : states[b].inh_traces.data()};
      if (real_mode) {
        const StdpTraceAverages avg = stdp_trace_averages(
            bank, views, gL.in_h, gL.in_w, params.stride, active);
        for (std::size_t j = 0; j < J; ++j) {
          if (avg.contributors[j] == 0) continue;
          const double inv_b = 1.0 / static_cast<double>(avg.contributors[j]);
          for (std::size_t w = 0; w < avg.kernel_len; ++w) {
            const std::size_t widx = j * avg.kernel_len + w;
            double value = bank.real_weights[widx] +
                           params.learning_rate *
                               (avg.sum_exc[widx] - avg.sum_inh[widx]) * inv_b;
            value = std::min<double>(bank.w_high,
                                     std::max<double>(bank.w_low, value));
            bank.real_weights[widx] = static_cast<float>(value);
          }
        }
      } else {
        minibatch_stdp_update(bank, views, gL.in_h, gL.in_w, params.stride,
                              active, exc_window, inh_window, params.seed,
                              static_cast<std::uint16_t>(L),
                              static_cast<std::uint32_t>(it),
                              static_cast<std::uint32_t>(step));
      }
      if (step + 1 < steps) kern = build_scatter(bank);
    }

    std::vector<std::uint64_t> totals(J, 0);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < J; ++j) totals[j] += states[b].counts[j];
    for (std::size_t j = 0; j < J; ++j)
      thresholds[j] =
          adapt_threshold(thresholds[j], totals[j], map_size, spec.beta_thresh);
  }

  bank.thresholds.assign(thresholds.begin(), thresholds.end());
  for (std::size_t j = 0; j < J; ++j)
    bank.thresholds[j] = static_cast<float>(thresholds[j]);
}

}  // namespace restocnet

#endif  // RESTOCNET_CONVNET_HPP
