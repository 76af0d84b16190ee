#ifndef RESTOCNET_MNIST_HPP
#define RESTOCNET_MNIST_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "restocnet/error.hpp"
#include "restocnet/tensor.hpp"

namespace restocnet {

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorClass::Io, "cannot open file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorClass::Io, "read failure: " + path);
  return bytes;
}

inline std::uint32_t be32(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

}  // namespace detail

/// Decode an IDX image file (big-endian magic 2051, dims, raw bytes).
inline Tensor4<float> decode_idx_images(const std::vector<unsigned char>& bytes,
                                        const std::string& name) {
  require(bytes.size() >= 16, ErrorClass::Format, name + ": truncated IDX header");
  const std::uint32_t magic = detail::be32(bytes.data());
  require(magic == 2051, ErrorClass::Format,
          name + ": IDX image magic mismatch (got " + std::to_string(magic) + ")");
  const std::uint32_t n = detail::be32(bytes.data() + 4);
  const std::uint32_t h = detail::be32(bytes.data() + 8);
  const std::uint32_t w = detail::be32(bytes.data() + 12);
  const std::size_t expect = 16 + static_cast<std::size_t>(n) * h * w;
  require(bytes.size() >= expect, ErrorClass::Format, name + ": truncated IDX payload");
  Tensor4<float> images(n, 1, h, w);
  for (std::size_t i = 0; i < images.size(); ++i)
    images.data[i] = static_cast<float>(bytes[16 + i]);
  return images;
}

/// Decode an IDX label file (big-endian magic 2049).
inline std::vector<int> decode_idx_labels(const std::vector<unsigned char>& bytes,
                                          const std::string& name) {
  require(bytes.size() >= 8, ErrorClass::Format, name + ": truncated IDX header");
  const std::uint32_t magic = detail::be32(bytes.data());
  require(magic == 2049, ErrorClass::Format,
          name + ": IDX label magic mismatch (got " + std::to_string(magic) + ")");
  const std::uint32_t n = detail::be32(bytes.data() + 4);
  require(bytes.size() >= 8 + static_cast<std::size_t>(n), ErrorClass::Format,
          name + ": truncated IDX payload");
  std::vector<int> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) labels[i] = bytes[8 + i];
  return labels;
}

/// Load one MNIST split from the four standard IDX files in `dir`.
inline LabeledImageSet load_mnist(const std::string& dir, const std::string& split) {
  require(split == "train" || split == "test", ErrorClass::Config,
          "split must be train or test");
  const std::string stem = (split == "train") ? "train" : "t10k";
  const std::string img_path = dir + "/" + stem + "-images-idx3-ubyte";
  const std::string lab_path = dir + "/" + stem + "-labels-idx1-ubyte";
  LabeledImageSet set;
  set.images = decode_idx_images(detail::read_file(img_path), img_path);
  set.labels = decode_idx_labels(detail::read_file(lab_path), lab_path);
  set.split = split;
  check_labels(set);
  return set;
}

}  // namespace restocnet

#endif
