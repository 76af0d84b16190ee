#ifndef RESTOCNET_PLASTICITY_HPP
#define RESTOCNET_PLASTICITY_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "restocnet/checkpoint.hpp"
#include "restocnet/error.hpp"
#include "restocnet/rng.hpp"

namespace restocnet {

/// HB is the full hybrid window (potentiation band, dead zone, anti-Hebbian
/// band); HB2 widens potentiation over the dead zone; HB3 widens depression
/// over it.
enum class StdpLayout { HB, HB2, HB3 };
enum class Polarity { Excitatory, Inhibitory };
enum class SwitchDecision { NoUpdate, HebbPotentiate, AntiHebbDepress, HebbDepress };

struct StdpWindowConfig {
  StdpLayout layout = StdpLayout::HB;
  Polarity polarity = Polarity::Excitatory;
  double pre_hebb_pot = 0.05;     // trace at/above which potentiation applies
  double pre_antihebb_dep = 0.005;  // trace at/below which depression applies
  double post_hebb_dep = 0.80;    // post-trace threshold, negative window
  double p_hebb_pot = 0.01;
  double p_antihebb_dep = 0.01;
  double p_hebb_dep = 0.0;        // 0 disables the negative window
};

inline void validate_window(const StdpWindowConfig& w) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  require(prob(w.p_hebb_pot) && prob(w.p_antihebb_dep) && prob(w.p_hebb_dep),
          ErrorClass::Config, "STDP probabilities must lie in [0, 1]");
  require(w.pre_hebb_pot > 0.0 && w.pre_hebb_pot <= 1.0 &&
              w.pre_antihebb_dep > 0.0 && w.pre_antihebb_dep <= 1.0 &&
              w.post_hebb_dep > 0.0 && w.post_hebb_dep <= 1.0,
          ErrorClass::Config, "STDP trace thresholds must lie in (0, 1]");
  if (w.layout == StdpLayout::HB)
    require(w.pre_antihebb_dep < w.pre_hebb_pot, ErrorClass::Config,
            "HB layout requires a nonempty dead zone "
            "(pre_antihebb_dep < pre_hebb_pot)");
}

/// Classifies a sampled pre-trace at a post-spike event under excitatory
/// semantics. Trace 0 (no pre-spike history) never updates.
inline SwitchDecision classify_excitatory(double t, const StdpWindowConfig& w) {
  if (t <= 0.0) return SwitchDecision::NoUpdate;
  switch (w.layout) {
    case StdpLayout::HB:
      if (t >= w.pre_hebb_pot) return SwitchDecision::HebbPotentiate;
      if (t <= w.pre_antihebb_dep) return SwitchDecision::AntiHebbDepress;
      return SwitchDecision::NoUpdate;  // dead zone
    case StdpLayout::HB2:
      return t > w.pre_antihebb_dep ? SwitchDecision::HebbPotentiate
                                    : SwitchDecision::AntiHebbDepress;
    case StdpLayout::HB3:
      return t >= w.pre_hebb_pot ? SwitchDecision::HebbPotentiate
                                 : SwitchDecision::AntiHebbDepress;
  }
  return SwitchDecision::NoUpdate;
}

/// Classifies a sampled post-trace at a pre-spike event (negative timing
/// window). Callers skip this entirely when p_hebb_dep is 0.
inline SwitchDecision classify_negative_window(double t,
                                               const StdpWindowConfig& w) {
  return t >= w.post_hebb_dep ? SwitchDecision::HebbDepress
                              : SwitchDecision::NoUpdate;
}

/// Inhibitory pre-neurons mirror the excitatory dynamics: every potentiating
/// outcome becomes the corresponding depressing outcome and vice versa.
inline SwitchDecision mirror_for_inhibitory(SwitchDecision d) {
  switch (d) {
    case SwitchDecision::HebbPotentiate:
      return SwitchDecision::HebbDepress;
    case SwitchDecision::AntiHebbDepress:
    case SwitchDecision::HebbDepress:
      return SwitchDecision::HebbPotentiate;
    case SwitchDecision::NoUpdate:
      break;
  }
  return SwitchDecision::NoUpdate;
}

/// A resolved switching event: the direction actually applied to the weight
/// plus the probability of the timing region that produced it. Mirroring
/// flips the direction but keeps the region's probability.
struct SwitchEvent {
  SwitchDecision decision = SwitchDecision::NoUpdate;
  double probability = 0.0;
};

inline double region_probability(SwitchDecision region,
                                 const StdpWindowConfig& w) {
  switch (region) {
    case SwitchDecision::HebbPotentiate:
      return w.p_hebb_pot;
    case SwitchDecision::AntiHebbDepress:
      return w.p_antihebb_dep;
    case SwitchDecision::HebbDepress:
      return w.p_hebb_dep;
    case SwitchDecision::NoUpdate:
      break;
  }
  return 0.0;
}

inline SwitchEvent classify_event(double pre_trace,
                                  const StdpWindowConfig& w) {
  const SwitchDecision region = classify_excitatory(pre_trace, w);
  SwitchEvent ev{region, region_probability(region, w)};
  if (w.polarity == Polarity::Inhibitory)
    ev.decision = mirror_for_inhibitory(region);
  return ev;
}

inline SwitchEvent classify_negative_event(double post_trace,
                                           const StdpWindowConfig& w) {
  const SwitchDecision region = classify_negative_window(post_trace, w);
  SwitchEvent ev{region, region_probability(region, w)};
  if (w.polarity == Polarity::Inhibitory)
    ev.decision = mirror_for_inhibitory(region);
  return ev;
}

inline bool is_potentiation(SwitchDecision d) {
  return d == SwitchDecision::HebbPotentiate;
}
inline bool is_depression(SwitchDecision d) {
  return d == SwitchDecision::AntiHebbDepress ||
         d == SwitchDecision::HebbDepress;
}

/// Applies one event to a binary weight bit (false = w_low, true = w_high)
/// using an externally drawn uniform u in [0, 1).
inline bool stochastic_switch_bit(bool high, const SwitchEvent& ev, double u) {
  if (u >= ev.probability) return high;
  if (is_potentiation(ev.decision)) return true;
  if (is_depression(ev.decision)) return false;
  return high;
}

inline float stochastic_switch(float weight, const SwitchEvent& ev, double u,
                               float w_low, float w_high) {
  const bool high = weight == w_high;
  return stochastic_switch_bit(high, ev, u) ? w_high : w_low;
}

/// Exponential decay of all traces, then reset-to-1 where the owner emitted
/// `polarity_value` (+1 excitatory plane, -1 inhibitory plane) this step.
inline void step_traces(std::vector<double>& traces, double decay,
                        const float* spikes, float polarity_value = 1.0f) {
  for (std::size_t k = 0; k < traces.size(); ++k) {
    traces[k] *= decay;
    if (spikes[k] == polarity_value) traces[k] = 1.0;
  }
}

/// Per-iteration map dropout mask; true = map stays active. Keyed by
/// (seed, layer, iteration, map), so masks are schedule-independent.
inline std::vector<std::uint8_t> draw_map_dropout(std::uint64_t seed,
                                                  std::uint16_t layer,
                                                  std::uint32_t iteration,
                                                  std::size_t num_maps,
                                                  double p_drop) {
  require(p_drop >= 0.0 && p_drop < 1.0, ErrorClass::Config,
          "p_drop must lie in [0, 1)");
  std::vector<std::uint8_t> active(num_maps, 1);
  for (std::size_t base = 0; base < num_maps; base += 4) {
    const rng::Block block = rng::draw(seed, rng::Phase::MapDropout, layer, iteration,
                             static_cast<std::uint32_t>(base >> 2), 0);
    const std::size_t limit = std::min<std::size_t>(4, num_maps - base);
    for (std::size_t l = 0; l < limit; ++l)
      if (block.u01(l) < p_drop) active[base + l] = 0;
  }
  return active;
}

/// One batch element's view of the layer at the current step: this layer's
/// post spikes (dropped maps already zeroed) and the pre-synaptic trace
/// planes by polarity. inh_traces may be null when inputs are unsigned.
struct StdpBatchElement {
  const float* post_spikes = nullptr;  // J x out_h x out_w
  const double* exc_traces = nullptr;  // I x in_h x in_w
  const double* inh_traces = nullptr;  // I x in_h x in_w, optional
};

/// Per-kernel averaged trace patches for one step: sums over contributing
/// batch elements (divide by `contributors[j]` for the batch mean). An
/// element contributes to kernel j iff map j had at least one spike on the
/// stride grid; its contribution is the patch mean over those positions.
struct StdpTraceAverages {
  std::vector<double> sum_exc, sum_inh;  // out * in * k * k
  std::vector<std::uint32_t> contributors;  // per output map
  std::size_t kernel_len = 0;  // in * k * k
};

inline StdpTraceAverages stdp_trace_averages(
    const WeightBank& bank, const std::vector<StdpBatchElement>& batch,
    std::size_t in_h, std::size_t in_w, std::size_t stride,
    const std::vector<std::uint8_t>& active_maps) {
  const std::size_t num_out = bank.out, num_in = bank.in, k = bank.height;
  require(bank.width == k, ErrorClass::Dimension, "kernels must be square");
  require(in_h >= k && in_w >= k, ErrorClass::Dimension,
          "input smaller than kernel");
  require(stride >= 1, ErrorClass::Config, "stride must be >= 1");
  require(active_maps.empty() || active_maps.size() == num_out,
          ErrorClass::Dimension, "dropout mask does not match map count");
  const std::size_t out_h = in_h - k + 1, out_w = in_w - k + 1;
  const std::size_t kk = k * k, kernel_len = num_in * kk;

  StdpTraceAverages avg;
  avg.kernel_len = kernel_len;
  avg.sum_exc.assign(num_out * kernel_len, 0.0);
  avg.sum_inh.assign(num_out * kernel_len, 0.0);
  avg.contributors.assign(num_out, 0);
  std::vector<std::size_t> positions;

  for (const StdpBatchElement& elem : batch) {
    for (std::size_t j = 0; j < num_out; ++j) {
      if (!active_maps.empty() && !active_maps[j]) continue;
      const float* post = elem.post_spikes + j * out_h * out_w;
      positions.clear();
      for (std::size_t y = 0; y < out_h; y += stride)
        for (std::size_t x = 0; x < out_w; x += stride)
          if (post[y * out_w + x] != 0.0f) positions.push_back(y * out_w + x);
      if (positions.empty()) continue;
      ++avg.contributors[j];
      const double inv = 1.0 / static_cast<double>(positions.size());
      for (std::size_t i = 0; i < num_in; ++i) {
        const double* exc = elem.exc_traces + i * in_h * in_w;
        const double* inh =
            elem.inh_traces ? elem.inh_traces + i * in_h * in_w : nullptr;
        double* se = avg.sum_exc.data() + j * kernel_len + i * kk;
        double* si = avg.sum_inh.data() + j * kernel_len + i * kk;
        for (std::size_t r = 0; r < k; ++r)
          for (std::size_t c = 0; c < k; ++c) {
            double acc_e = 0.0, acc_i = 0.0;
            for (const std::size_t pos : positions) {
              const std::size_t y = pos / out_w, x = pos % out_w;
              const std::size_t src = (y + r) * in_w + (x + c);
              acc_e += exc[src];
              if (inh) acc_i += inh[src];
            }
            se[r * k + c] += acc_e * inv;
            si[r * k + c] += acc_i * inv;
          }
      }
    }
  }
  return avg;
}

/// Mini-batch kernel update. For every kernel (j, i): average the k x k
/// pre-trace patch over spiking stride-grid positions within each map, then
/// over the batch elements whose map j spiked; classify each averaged trace
/// per polarity and switch stochastically, excitatory event first. One rng
/// draw block per (weight, step, iteration); lane 0 drives the excitatory
/// event, lane 1 the inhibitory one. Kernels with no spiking post-neurons
/// are untouched.
inline void minibatch_stdp_update(
    WeightBank& bank, const std::vector<StdpBatchElement>& batch,
    std::size_t in_h, std::size_t in_w, std::size_t stride,
    const std::vector<std::uint8_t>& active_maps,
    const StdpWindowConfig& exc_window, const StdpWindowConfig& inh_window,
    std::uint64_t seed, std::uint16_t layer, std::uint32_t iteration,
    std::uint32_t step) {
  require(bank.bits.size() == bank.weight_count(), ErrorClass::State,
          "binary kernel bank expected");
  const StdpTraceAverages avg =
      stdp_trace_averages(bank, batch, in_h, in_w, stride, active_maps);
  for (std::size_t j = 0; j < bank.out; ++j) {
    if (avg.contributors[j] == 0) continue;
    const double inv_b = 1.0 / static_cast<double>(avg.contributors[j]);
    for (std::size_t w = 0; w < avg.kernel_len; ++w) {
      const std::size_t widx = j * avg.kernel_len + w;
      const SwitchEvent exc_ev =
          classify_event(avg.sum_exc[widx] * inv_b, exc_window);
      const SwitchEvent inh_ev =
          classify_event(avg.sum_inh[widx] * inv_b, inh_window);
      if (exc_ev.decision == SwitchDecision::NoUpdate &&
          inh_ev.decision == SwitchDecision::NoUpdate)
        continue;
      const rng::Block block = rng::draw(seed, rng::Phase::StdpSwitch, layer, iteration, step,
                               static_cast<std::uint32_t>(widx));
      bool high = bank.bits[widx] != 0;
      high = stochastic_switch_bit(high, exc_ev, block.u01(0));
      high = stochastic_switch_bit(high, inh_ev, block.u01(1));
      bank.bits[widx] = high ? 1 : 0;
    }
  }
}

}  // namespace restocnet

#endif  // RESTOCNET_PLASTICITY_HPP
