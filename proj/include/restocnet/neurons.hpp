#ifndef RESTOCNET_NEURONS_HPP
#define RESTOCNET_NEURONS_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "restocnet/error.hpp"

namespace restocnet {

/// One LIF step over a layer laid out as (map, row, col), threshold shared
/// per map: V <- V*decay + I; spike (+1) strictly above threshold, spiking
/// potentials reset to exactly 0. `decay` = exp(-dt/tau_mem). Returns the
/// number of spikes; `spikes` receives {0, 1} floats.
inline std::size_t lif_step(std::vector<double>& v, const float* current,
                            const std::vector<double>& thresholds,
                            std::size_t map_size, double decay,
                            float* spikes) {
  require(map_size > 0 && v.size() == thresholds.size() * map_size,
          ErrorClass::Dimension, "LIF state does not match map geometry");
  std::size_t count = 0;
  for (std::size_t m = 0; m < thresholds.size(); ++m) {
    const double threshold = thresholds[m];
    double* vm = v.data() + m * map_size;
    const float* im = current + m * map_size;
    float* sm = spikes + m * map_size;
    for (std::size_t k = 0; k < map_size; ++k) {
      double u = vm[k] * decay + im[k];
      if (u > threshold) {
        sm[k] = 1.0f;
        u = 0.0;
        ++count;
      } else {
        sm[k] = 0.0f;
      }
      vm[k] = u;
    }
  }
  return count;
}

/// One leakless IF step for pooling neurons: V <- V + drive; spike (+1)
/// strictly above theta, then reset to 0.
inline std::size_t if_pool_step(std::vector<double>& v, const float* drive,
                                double theta, float* spikes) {
  std::size_t count = 0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    double u = v[k] + drive[k];
    if (u > theta) {
      spikes[k] = 1.0f;
      u = 0.0;
      ++count;
    } else {
      spikes[k] = 0.0f;
    }
    v[k] = u;
  }
  return count;
}

/// Homeostatic threshold growth, applied once per training iteration per
/// output map; `count` is the map's spike total over the whole mini-batch
/// and all steps.
inline double adapt_threshold(double threshold, std::uint64_t count,
                              std::size_t map_size, double beta) {
  require(map_size > 0, ErrorClass::Dimension, "empty map in adapt_threshold");
  return threshold +
         beta * static_cast<double>(count) / static_cast<double>(map_size);
}

}  // namespace restocnet

#endif  // RESTOCNET_NEURONS_HPP
