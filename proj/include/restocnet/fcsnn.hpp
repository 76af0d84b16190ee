#ifndef RESTOCNET_FCSNN_HPP
#define RESTOCNET_FCSNN_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <vector>

#include "restocnet/checkpoint.hpp"
#include "restocnet/encoding.hpp"
#include "restocnet/error.hpp"
#include "restocnet/parallel.hpp"
#include "restocnet/plasticity.hpp"
#include "restocnet/rng.hpp"
#include "restocnet/tensor.hpp"

namespace restocnet {

/// Two-layer fully-connected SNN with binary input->excitatory weights,
/// adaptive thresholds and simplified all-to-all lateral inhibition.
struct FcsnnConfig {
  std::size_t num_inputs = 784;
  std::size_t num_neurons = 400;
  double dt = 0.5e-3;        // seconds
  double duration = 0.35;    // seconds per presentation
  double max_rate = 63.75;   // input spikes/second at full drive
  double tau_mem = 0.1;      // seconds
  double tau_trace = 0.02;   // seconds, pre and post traces
  double refractory = 5e-3;  // seconds
  double v_thresh = 1.0;     // base firing threshold
  double theta_inc = 0.05;   // adaptive threshold bump per spike
  double tau_theta = 1e4;    // seconds, adaptive threshold decay
  double inhibition = 0.5;   // potential drop per competitor spike
  double min_potential = -1.0;  // inhibition floor
  StdpWindowConfig window{StdpLayout::HB,
                          Polarity::Excitatory,
                          0.85,
                          0.10,
                          0.80,
                          0.08,
                          0.06,
                          0.005};
};

inline void validate_fcsnn(const FcsnnConfig& cfg) {
  require(cfg.num_inputs > 0 && cfg.num_neurons > 0, ErrorClass::Config,
          "network needs inputs and neurons");
  require(cfg.dt > 0 && cfg.duration > 0 && cfg.tau_mem > 0 &&
              cfg.tau_trace > 0 && cfg.tau_theta > 0,
          ErrorClass::Config, "time constants must be positive");
  require(cfg.refractory >= 0 && cfg.inhibition >= 0, ErrorClass::Config,
          "refractory period and inhibition must be non-negative");
  require(cfg.min_potential <= 0.0, ErrorClass::Config,
          "potential floor must not exceed the reset value");
  validate_window(cfg.window);
}

/// Mutable per-presentation state; adaptive thresholds live on the network.
struct FcsnnState {
  std::vector<double> v;           // membrane potentials
  std::vector<int> refract;        // remaining refractory steps
  std::vector<double> pre_trace;   // one per input
  std::vector<double> post_trace;  // one per neuron
  std::vector<float> prev_spikes;  // for next-step lateral inhibition
  std::size_t prev_total = 0;
  std::vector<double> drive;           // scratch: feedforward input
  std::vector<std::uint32_t> hot_post;  // scratch: high post-trace neurons

  explicit FcsnnState(const FcsnnConfig& cfg)
      : v(cfg.num_neurons, 0.0),
        refract(cfg.num_neurons, 0),
        pre_trace(cfg.num_inputs, 0.0),
        post_trace(cfg.num_neurons, 0.0),
        prev_spikes(cfg.num_neurons, 0.0f),
        drive(cfg.num_neurons, 0.0) {}

  void reset() {
    std::fill(v.begin(), v.end(), 0.0);
    std::fill(refract.begin(), refract.end(), 0);
    std::fill(pre_trace.begin(), pre_trace.end(), 0.0);
    std::fill(post_trace.begin(), post_trace.end(), 0.0);
    std::fill(prev_spikes.begin(), prev_spikes.end(), 0.0f);
    prev_total = 0;
  }
};

class FcsnnNetwork {
 public:
  FcsnnNetwork(const FcsnnConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        seed_(seed),
        weights_(cfg.num_inputs * cfg.num_neurons, 0.0f),
        theta_(cfg.num_neurons, 0.0),
        tags_(cfg.num_neurons, -1) {
    validate_fcsnn(cfg);
    decay_mem_ = std::exp(-cfg.dt / cfg.tau_mem);
    decay_trace_ = std::exp(-cfg.dt / cfg.tau_trace);
    decay_theta_ = std::exp(-cfg.dt / cfg.tau_theta);
    refract_steps_ = static_cast<int>(std::lround(cfg.refractory / cfg.dt));
    for (std::size_t j = 0; j < cfg.num_neurons; ++j)
      for (std::size_t i = 0; i < cfg.num_inputs; ++i)
        weight(i, j) = rng::uniform_at(
                           seed, rng::Phase::FcsnnInit, 0, 0, 0,
                           static_cast<std::uint32_t>(j * cfg.num_inputs + i)) <
                               0.5
                           ? 1.0f
                           : 0.0f;
  }

  const FcsnnConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<int>& tags() const { return tags_; }
  std::vector<int>& tags() { return tags_; }
  const std::vector<double>& theta() const { return theta_; }
  std::vector<double>& theta() { return theta_; }

  // Input-major storage keeps the per-input-spike scatter contiguous.
  float& weight(std::size_t input, std::size_t neuron) {
    return weights_[input * cfg_.num_neurons + neuron];
  }
  float weight(std::size_t input, std::size_t neuron) const {
    return weights_[input * cfg_.num_neurons + neuron];
  }

  std::size_t steps() const { return encoder_steps(encoder_config(0)); }

  /// One network step over this step's input plane ({0,1} floats); output
  /// spikes land in `out_spikes`. With plasticity on, weights switch keyed
  /// by (rule, presentation, step, synapse) and thresholds adapt; with it
  /// off no member is written, so frozen runs may share the network.
  std::size_t simulate_step(const float* input_spikes, FcsnnState& st,
                            bool plastic, std::uint32_t presentation,
                            std::uint32_t step, float* out_spikes) const {
    const std::size_t I = cfg_.num_inputs, J = cfg_.num_neurons;
    FcsnnNetwork* self = plastic ? const_cast<FcsnnNetwork*>(this) : nullptr;

    for (std::size_t i = 0; i < I; ++i) st.pre_trace[i] *= decay_trace_;
    for (std::size_t j = 0; j < J; ++j) st.post_trace[j] *= decay_trace_;

    // Pre-after-post rule: an input spiking while a neuron's post trace is
    // still high depresses that synapse. Only recently spiked neurons can
    // qualify, so gather them once.
    if (plastic && cfg_.window.p_hebb_dep > 0.0) {
      st.hot_post.clear();
      for (std::size_t j = 0; j < J; ++j)
        if (classify_negative_event(st.post_trace[j], cfg_.window).decision !=
            SwitchDecision::NoUpdate)
          st.hot_post.push_back(static_cast<std::uint32_t>(j));
      if (!st.hot_post.empty()) {
        for (std::size_t i = 0; i < I; ++i) {
          if (input_spikes[i] == 0.0f) continue;
          for (const std::uint32_t j : st.hot_post) {
            const SwitchEvent ev =
                classify_negative_event(st.post_trace[j], cfg_.window);
            self->apply_switch(i, j, ev, 0, presentation, step);
          }
        }
      }
    }
    for (std::size_t i = 0; i < I; ++i)
      if (input_spikes[i] != 0.0f) st.pre_trace[i] = 1.0;

    // Integrate: feedforward drive plus last step's lateral inhibition.
    std::fill(st.drive.begin(), st.drive.end(), 0.0);
    for (std::size_t i = 0; i < I; ++i) {
      if (input_spikes[i] == 0.0f) continue;
      const float* row = weights_.data() + i * J;
      for (std::size_t j = 0; j < J; ++j) st.drive[j] += row[j];
    }
    std::size_t fired = 0;
    for (std::size_t j = 0; j < J; ++j) {
      if (st.refract[j] > 0) {
        --st.refract[j];
        st.v[j] = 0.0;
        out_spikes[j] = 0.0f;
        continue;
      }
      double u = st.v[j] * decay_mem_ + st.drive[j];
      if (st.prev_total > 0) {
        const double others =
            static_cast<double>(st.prev_total) - st.prev_spikes[j];
        u -= cfg_.inhibition * others;
      }
      u = std::max(u, cfg_.min_potential);
      if (u > cfg_.v_thresh + theta_[j]) {
        out_spikes[j] = 1.0f;
        st.v[j] = 0.0;
        st.refract[j] = refract_steps_;
        if (plastic) self->theta_[j] += cfg_.theta_inc;
        ++fired;
      } else {
        out_spikes[j] = 0.0f;
        st.v[j] = u;
      }
    }

    // Post-after-pre rule: a spiking neuron potentiates synapses from
    // recently active inputs and depresses those from long-idle ones.
    if (plastic && fired > 0) {
      for (std::size_t j = 0; j < J; ++j) {
        if (out_spikes[j] == 0.0f) continue;
        for (std::size_t i = 0; i < I; ++i) {
          const SwitchEvent ev = classify_event(st.pre_trace[i], cfg_.window);
          if (ev.decision == SwitchDecision::NoUpdate) continue;
          self->apply_switch(i, j, ev, 1, presentation, step);
        }
      }
    }
    for (std::size_t j = 0; j < J; ++j)
      if (out_spikes[j] != 0.0f) st.post_trace[j] = 1.0;

    if (plastic)
      for (std::size_t j = 0; j < J; ++j) self->theta_[j] *= decay_theta_;
    std::copy(out_spikes, out_spikes + J, st.prev_spikes.begin());
    st.prev_total = fired;
    return fired;
  }

  /// Presents one image with plasticity enabled; returns per-neuron spike
  /// counts. Thresholds adapt and persist; all other state is per-call.
  std::vector<std::uint32_t> train_pattern(const float* pixels,
                                           std::uint32_t image_index,
                                           std::uint32_t presentation,
                                           std::uint16_t stream) {
    FcsnnState st(cfg_);
    return present(pixels, image_index, stream, st, true, presentation);
  }

  /// Frozen-network presentation; safe to call concurrently.
  std::vector<std::uint32_t> run_pattern(const float* pixels,
                                         std::uint32_t image_index,
                                         std::uint16_t stream) const {
    FcsnnState st(cfg_);
    return present(pixels, image_index, stream, st, false, 0);
  }

  WeightBank to_bank() const {
    WeightBank bank;
    bank.out = static_cast<std::uint16_t>(cfg_.num_neurons);
    bank.in = static_cast<std::uint16_t>(cfg_.num_inputs);
    bank.height = bank.width = 1;
    bank.w_low = 0.0f;
    bank.w_high = 1.0f;
    bank.bits.resize(bank.weight_count());
    for (std::size_t j = 0; j < cfg_.num_neurons; ++j)
      for (std::size_t i = 0; i < cfg_.num_inputs; ++i)
        bank.bits[j * cfg_.num_inputs + i] = weight(i, j) != 0.0f ? 1 : 0;
    bank.thresholds.resize(cfg_.num_neurons);
    for (std::size_t j = 0; j < cfg_.num_neurons; ++j)
      bank.thresholds[j] = static_cast<float>(theta_[j]);
    bank.tags.assign(tags_.begin(), tags_.end());
    return bank;
  }

  void load_bank(const WeightBank& bank) {
    require(bank.out == cfg_.num_neurons && bank.in == cfg_.num_inputs &&
                bank.height == 1 && bank.width == 1,
            ErrorClass::Dimension, "checkpoint does not match this network");
    require(bank.bits.size() == bank.weight_count(), ErrorClass::Format,
            "binary weights expected");
    for (std::size_t j = 0; j < cfg_.num_neurons; ++j)
      for (std::size_t i = 0; i < cfg_.num_inputs; ++i)
        weight(i, j) = bank.bits[j * cfg_.num_inputs + i] ? 1.0f : 0.0f;
    if (!bank.thresholds.empty()) {
      require(bank.thresholds.size() == cfg_.num_neurons, ErrorClass::Format,
              "threshold count mismatch");
      theta_.assign(bank.thresholds.begin(), bank.thresholds.end());
    }
    if (!bank.tags.empty()) {
      require(bank.tags.size() == cfg_.num_neurons, ErrorClass::Format,
              "tag count mismatch");
      tags_.assign(bank.tags.begin(), bank.tags.end());
    }
  }

 private:
  EncoderConfig encoder_config(std::uint16_t stream) const {
    EncoderConfig enc;
    enc.max_rate = cfg_.max_rate;
    enc.dt = cfg_.dt;
    enc.duration = cfg_.duration;
    enc.mode = PolarityMode::Unsigned;
    enc.stream = stream;
    return enc;
  }

  std::vector<std::uint32_t> present(const float* pixels,
                                     std::uint32_t image_index,
                                     std::uint16_t stream, FcsnnState& st,
                                     bool plastic,
                                     std::uint32_t presentation) const {
    PoissonEncoder enc(encoder_config(stream), seed_);
    enc.set_image(pixels, cfg_.num_inputs, image_index);
    std::vector<float> input(cfg_.num_inputs), spikes(cfg_.num_neurons);
    std::vector<std::uint32_t> counts(cfg_.num_neurons, 0);
    const std::size_t total = enc.steps();
    for (std::size_t step = 0; step < total; ++step) {
      enc.emit_step(static_cast<std::uint32_t>(step), input.data());
      simulate_step(input.data(), st, plastic, presentation,
                    static_cast<std::uint32_t>(step), spikes.data());
      for (std::size_t j = 0; j < cfg_.num_neurons; ++j)
        if (spikes[j] != 0.0f) ++counts[j];
    }
    return counts;
  }

  void apply_switch(std::size_t i, std::size_t j, const SwitchEvent& ev,
                    std::uint32_t rule, std::uint32_t presentation,
                    std::uint32_t step) {
    const std::size_t s = j * cfg_.num_inputs + i;
    const rng::Block block =
        rng::draw(seed_, rng::Phase::FcsnnSwitch, rule, presentation, step,
                  static_cast<std::uint32_t>(s >> 2));
    float& w = weight(i, j);
    w = stochastic_switch(w, ev, block.u01(s & 3), 0.0f, 1.0f);
  }

  FcsnnConfig cfg_;
  std::uint64_t seed_;
  std::vector<float> weights_;  // input-major: [input][neuron]
  std::vector<double> theta_;
  std::vector<int> tags_;
  double decay_mem_ = 0.0, decay_trace_ = 0.0, decay_theta_ = 0.0;
  int refract_steps_ = 0;
};

struct TrainFcsnnParams {
  std::size_t epochs = 1;
  std::uint16_t stream_base = 200;  // per-epoch encoder stream: base + epoch
};

/// Presents `subset` in order for the requested epochs with plasticity on.
inline void train_fcsnn(FcsnnNetwork& net, const LabeledImageSet& set,
                        const std::vector<std::size_t>& subset,
                        const TrainFcsnnParams& params) {
  require(set.images.image_size() == net.config().num_inputs,
          ErrorClass::Dimension, "image size does not match network inputs");
  std::uint32_t presentation = 0;
  for (std::size_t e = 0; e < params.epochs; ++e) {
    const std::uint16_t stream =
        static_cast<std::uint16_t>(params.stream_base + e);
    for (const std::size_t idx : subset) {
      net.train_pattern(set.images.image(idx), static_cast<std::uint32_t>(idx),
                        presentation, stream);
      ++presentation;
    }
  }
}

/// Assigns each neuron the class for which it spiked most over the tagging
/// set (ties to the lowest class id); silent neurons stay untagged (-1).
inline void tag_neurons(FcsnnNetwork& net, const LabeledImageSet& set,
                        const std::vector<std::size_t>& subset,
                        std::uint16_t stream, unsigned workers,
                        int num_classes = 10) {
  require(set.images.image_size() == net.config().num_inputs,
          ErrorClass::Dimension, "image size does not match network inputs");
  const std::size_t J = net.config().num_neurons;
  std::vector<std::uint64_t> by_class(J * num_classes, 0);
  std::mutex merge;
  parallel_for(subset.size(), workers, [&](std::size_t k) {
    const std::size_t idx = subset[k];
    const int label = set.labels[idx];
    require(label >= 0 && label < num_classes, ErrorClass::State,
            "label outside the class range");
    const std::vector<std::uint32_t> counts = net.run_pattern(
        set.images.image(idx), static_cast<std::uint32_t>(idx), stream);
    std::lock_guard<std::mutex> hold(merge);
    for (std::size_t j = 0; j < J; ++j)
      by_class[j * num_classes + label] += counts[j];
  });
  for (std::size_t j = 0; j < J; ++j) {
    std::uint64_t best = 0;
    int tag = -1;
    for (int c = 0; c < num_classes; ++c) {
      const std::uint64_t n = by_class[j * num_classes + c];
      if (n > best) {
        best = n;
        tag = c;
      }
    }
    net.tags()[j] = tag;
  }
}

/// Picks the class whose tagged group has the highest per-neuron average
/// spike count; ties break to the lowest class id. If nothing fires, the
/// lowest tagged class is returned.
inline int predict(const FcsnnNetwork& net, const float* pixels,
                   std::uint32_t image_index, std::uint16_t stream,
                   int num_classes = 10) {
  const std::vector<std::uint32_t> counts =
      net.run_pattern(pixels, image_index, stream);
  std::vector<std::uint64_t> votes(num_classes, 0);
  std::vector<std::uint64_t> group(num_classes, 0);
  int lowest_tag = -1;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const int tag = net.tags()[j];
    if (tag < 0 || tag >= num_classes) continue;
    if (lowest_tag < 0 || tag < lowest_tag) lowest_tag = tag;
    votes[tag] += counts[j];
    ++group[tag];
  }
  // Cross-multiplied integer compare keeps the group averages exact.
  int best = lowest_tag < 0 ? 0 : lowest_tag;
  for (int c = 0; c < num_classes; ++c) {
    if (group[c] == 0 || c == best) continue;
    if (votes[c] * group[best] > votes[best] * group[c]) best = c;
  }
  return best;
}

/// Fraction of correct predictions over `subset`.
inline double evaluate_fcsnn(const FcsnnNetwork& net,
                             const LabeledImageSet& set,
                             const std::vector<std::size_t>& subset,
                             std::uint16_t stream, unsigned workers,
                             int num_classes = 10) {
  std::vector<std::uint8_t> correct(subset.size(), 0);
  parallel_for(subset.size(), workers, [&](std::size_t k) {
    const std::size_t idx = subset[k];
    const int guess = predict(net, set.images.image(idx),
                              static_cast<std::uint32_t>(idx), stream,
                              num_classes);
    correct[k] = guess == set.labels[idx] ? 1 : 0;
  });
  std::size_t hits = 0;
  for (const std::uint8_t c : correct) hits += c;
  return subset.empty() ? 0.0
                        : static_cast<double>(hits) /
                              static_cast<double>(subset.size());
}

}  // namespace restocnet

#endif  // RESTOCNET_FCSNN_HPP
