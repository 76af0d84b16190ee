#ifndef RESTOCNET_ENCODING_HPP
#define RESTOCNET_ENCODING_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "restocnet/error.hpp"
#include "restocnet/rng.hpp"

namespace restocnet {

enum class PolarityMode { Unsigned, Signed };

/// Bernoulli-per-step Poisson encoder parameters. `stream` separates
/// independent spike realizations of the same image (train/test/tagging
/// passes and so on).
struct EncoderConfig {
  double max_rate = 500.0;  // spikes per second at full drive
  double dt = 1e-3;         // seconds per step
  double duration = 0.1;    // seconds per presentation
  PolarityMode mode = PolarityMode::Unsigned;
  std::uint16_t stream = 0;
};

inline std::size_t encoder_steps(const EncoderConfig& cfg) {
  require(cfg.dt > 0.0 && cfg.duration > 0.0, ErrorClass::Config,
          "encoder dt and duration must be positive");
  const double steps = cfg.duration / cfg.dt;
  const double rounded = std::round(steps);
  require(std::fabs(steps - rounded) < 1e-6 && rounded >= 1.0,
          ErrorClass::Config,
          "encoder duration must be an integer multiple of dt");
  return static_cast<std::size_t>(rounded);
}

inline void validate_encoder(const EncoderConfig& cfg) {
  encoder_steps(cfg);
  require(cfg.max_rate >= 0.0, ErrorClass::Config,
          "encoder max_rate must be nonnegative");
  require(cfg.max_rate * cfg.dt <= 1.0, ErrorClass::Config,
          "max_rate * dt exceeds 1: per-step spike probability invalid");
}

/// Firing rate (spikes/second) for one pixel. Unsigned mode scales raw
/// 0..255 intensities; signed mode scales |pixel| by the image's max-abs,
/// the sign travelling separately. Degenerate inputs yield rate 0.
inline double pixel_rate(double pixel, double image_max_abs,
                         const EncoderConfig& cfg) {
  if (cfg.mode == PolarityMode::Unsigned) {
    const double r = pixel / 255.0 * cfg.max_rate;
    return r > 0.0 ? (r < cfg.max_rate ? r : cfg.max_rate) : 0.0;
  }
  if (image_max_abs <= 0.0) return 0.0;
  return std::fabs(pixel) / image_max_abs * cfg.max_rate;
}

/// Streams one image's spike train step by step. Emission is keyed by
/// (seed, stream, image index, neuron index, step), so any subset of steps
/// or images can be produced independently and in any order.
class PoissonEncoder {
 public:
  PoissonEncoder(const EncoderConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), seed_(seed), steps_(encoder_steps(cfg)) {
    validate_encoder(cfg);
  }

  std::size_t steps() const { return steps_; }
  const EncoderConfig& config() const { return cfg_; }

  void set_image(const float* pixels, std::size_t count,
                 std::uint32_t image_index) {
    image_ = image_index;
    prob_.assign(count, 0.0f);
    sign_.assign(count, 1.0f);
    double max_abs = 0.0;
    if (cfg_.mode == PolarityMode::Signed)
      for (std::size_t i = 0; i < count; ++i)
        max_abs = std::max(max_abs, std::fabs(static_cast<double>(pixels[i])));
    for (std::size_t i = 0; i < count; ++i) {
      prob_[i] = static_cast<float>(
          pixel_rate(pixels[i], max_abs, cfg_) * cfg_.dt);
      if (cfg_.mode == PolarityMode::Signed && pixels[i] < 0.0f)
        sign_[i] = -1.0f;
    }
  }

  /// Writes this step's spikes as {-1, 0, +1} into out[neuron_count()].
  void emit_step(std::uint32_t step, float* out) const {
    const std::size_t n = prob_.size();
    for (std::size_t base = 0; base < n; base += 4) {
      const std::size_t limit = std::min<std::size_t>(4, n - base);
      bool any = false;
      for (std::size_t l = 0; l < limit; ++l) {
        out[base + l] = 0.0f;
        if (prob_[base + l] > 0.0f) any = true;
      }
      if (!any) continue;
      const rng::Block block =
          rng::draw(seed_, rng::Phase::Encode, cfg_.stream, image_,
               static_cast<std::uint32_t>(base >> 2), step);
      for (std::size_t l = 0; l < limit; ++l)
        if (block.u01(l) < prob_[base + l]) out[base + l] = sign_[base + l];
    }
  }

  std::size_t neuron_count() const { return prob_.size(); }

 private:
  EncoderConfig cfg_;
  std::uint64_t seed_;
  std::size_t steps_;
  std::uint32_t image_ = 0;
  std::vector<float> prob_, sign_;
};

/// Full spike train for one image, row-major (step, neuron). Convenience
/// wrapper for tests and small experiments.
inline std::vector<float> poisson_encode(const EncoderConfig& cfg,
                                         std::uint64_t seed,
                                         std::uint32_t image_index,
                                         const float* pixels,
                                         std::size_t count) {
  PoissonEncoder enc(cfg, seed);
  enc.set_image(pixels, count, image_index);
  std::vector<float> spikes(enc.steps() * count);
  for (std::size_t t = 0; t < enc.steps(); ++t)
    enc.emit_step(static_cast<std::uint32_t>(t), spikes.data() + t * count);
  return spikes;
}

}  // namespace restocnet

#endif  // RESTOCNET_ENCODING_HPP
