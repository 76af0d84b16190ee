#ifndef RESTOCNET_METRICS_HPP
#define RESTOCNET_METRICS_HPP

#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "restocnet/error.hpp"

namespace restocnet {

/// Kernel/weight storage descriptor: `count` units of `size` x `size`
/// weights at `bits` bits each (size 1 for fully-connected synapses).
struct StorageDescriptor {
  std::uint64_t count = 0;
  std::uint64_t size = 1;
  std::uint64_t bits = 32;

  std::uint64_t total_bits() const { return count * size * size * bits; }
};

/// Memory ratio between two storage descriptors, kept as an exact reduced
/// rational; `decimal()` truncates (not rounds) to one decimal place.
struct CompressionReport {
  StorageDescriptor baseline, subject;
  std::uint64_t num = 0, den = 1;  // reduced baseline/subject bit ratio

  double exact() const {
    return static_cast<double>(num) / static_cast<double>(den);
  }
  /// One-decimal truncation computed in integer arithmetic: 10*num/den / 10.
  double decimal() const {
    return static_cast<double>(10 * num / den) / 10.0;
  }
  std::string decimal_text() const {
    const std::uint64_t tenths = 10 * num / den;
    return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
  }
};

inline CompressionReport compression_ratio(const StorageDescriptor& baseline,
                                           const StorageDescriptor& subject) {
  require(baseline.count > 0 && baseline.size > 0 && baseline.bits > 0,
          ErrorClass::Config, "baseline descriptor must be positive");
  require(subject.count > 0 && subject.size > 0 && subject.bits > 0,
          ErrorClass::Config, "subject descriptor must be positive");
  CompressionReport report;
  report.baseline = baseline;
  report.subject = subject;
  report.num = baseline.total_bits();
  report.den = subject.total_bits();
  const std::uint64_t g = std::gcd(report.num, report.den);
  report.num /= g;
  report.den /= g;
  return report;
}

/// Kernel memory ratio: full-precision baseline kernels at 32 bits against
/// binary kernels at 2 bits (the {-1,+1} reporting convention).
inline CompressionReport kernel_compression(std::uint64_t baseline_count,
                                            std::uint64_t baseline_size,
                                            std::uint64_t subject_count,
                                            std::uint64_t subject_size) {
  return compression_ratio({baseline_count, baseline_size, 32},
                           {subject_count, subject_size, 2});
}

/// Synaptic memory ratio for the fully-connected baseline: full-precision
/// weights at 32 bits against binary weights at 1 bit, `inputs` synapses
/// per neuron on both sides.
inline CompressionReport synaptic_compression(std::uint64_t baseline_neurons,
                                              std::uint64_t subject_neurons,
                                              std::uint64_t inputs) {
  require(inputs > 0, ErrorClass::Config, "input count must be positive");
  return compression_ratio({baseline_neurons * inputs, 1, 32},
                           {subject_neurons * inputs, 1, 1});
}

struct AccuracyReport {
  double accuracy = 0.0;
  std::size_t correct = 0, total = 0;
  std::array<std::array<std::uint32_t, 10>, 10> confusion{};  // [label][guess]
};

inline AccuracyReport evaluate_accuracy(const std::vector<int>& predictions,
                                        const std::vector<int>& labels) {
  require(predictions.size() == labels.size(), ErrorClass::Dimension,
          "prediction and label counts differ");
  AccuracyReport report;
  report.total = labels.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    require(y >= 0 && y < 10, ErrorClass::State, "label outside [0, 10)");
    if (p == y) ++report.correct;
    if (p >= 0 && p < 10)
      ++report.confusion[static_cast<std::size_t>(y)]
                        [static_cast<std::size_t>(p)];
  }
  report.accuracy = report.total == 0
                        ? 0.0
                        : static_cast<double>(report.correct) /
                              static_cast<double>(report.total);
  return report;
}

}  // namespace restocnet

#endif  // RESTOCNET_METRICS_HPP
