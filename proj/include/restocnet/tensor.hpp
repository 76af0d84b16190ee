#ifndef RESTOCNET_TENSOR_HPP
#define RESTOCNET_TENSOR_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "restocnet/error.hpp"

namespace restocnet {

/// Dense row-major (n, c, h, w) tensor.
template <typename T>
struct Tensor4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_, T fill = T{})
      : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t image_size() const { return c * h * w; }

  T& at(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) {
    return data[((i * c + ch) * h + y) * w + x];
  }
  const T& at(std::size_t i, std::size_t ch, std::size_t y, std::size_t x) const {
    return data[((i * c + ch) * h + y) * w + x];
  }

  T* image(std::size_t i) { return data.data() + i * image_size(); }
  const T* image(std::size_t i) const { return data.data() + i * image_size(); }
};

/// Image dataset with class labels in [0, 9].
struct LabeledImageSet {
  Tensor4<float> images;
  std::vector<int> labels;
  std::string split;  // "train" | "test"

  std::size_t count() const { return images.n; }
};

inline void check_labels(const LabeledImageSet& set) {
  require(set.images.n == set.labels.size(), ErrorClass::Dimension,
          "image count does not match label count");
  for (int label : set.labels)
    require(label >= 0 && label <= 9, ErrorClass::Format,
            "label out of range [0, 9]: " + std::to_string(label));
}

}  // namespace restocnet

#endif
