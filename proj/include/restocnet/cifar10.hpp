#ifndef RESTOCNET_CIFAR10_HPP
#define RESTOCNET_CIFAR10_HPP

#include <string>
#include <vector>

#include "restocnet/error.hpp"
#include "restocnet/mnist.hpp"
#include "restocnet/tensor.hpp"

namespace restocnet {

inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;

/// Decode one CIFAR-10 binary batch: 3073-byte records, label byte followed by
/// 3072 channel-major (R, G, B) pixel bytes.
inline void decode_cifar_batch(const std::vector<unsigned char>& bytes,
                               const std::string& name, LabeledImageSet& out) {
  require(!bytes.empty() && bytes.size() % kCifarRecordBytes == 0, ErrorClass::Format,
          name + ": size is not a multiple of the 3073-byte record");
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  const std::size_t base = out.images.n;
  Tensor4<float> grown(base + records, 3, 32, 32);
  std::copy(out.images.data.begin(), out.images.data.end(), grown.data.begin());
  out.images = std::move(grown);
  for (std::size_t r = 0; r < records; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
    require(rec[0] <= 9, ErrorClass::Format,
            name + ": label byte > 9 in record " + std::to_string(r));
    out.labels.push_back(rec[0]);
    float* dst = out.images.image(base + r);
    for (std::size_t k = 0; k < 3072; ++k) dst[k] = static_cast<float>(rec[1 + k]);
  }
}

/// Load a CIFAR-10 split from the standard binary batches in `dir`
/// (data_batch_1..5.bin for train, test_batch.bin for test).
inline LabeledImageSet load_cifar10(const std::string& dir, const std::string& split) {
  require(split == "train" || split == "test", ErrorClass::Config,
          "split must be train or test");
  LabeledImageSet set;
  set.images = Tensor4<float>(0, 3, 32, 32);
  set.split = split;
  if (split == "train") {
    for (int b = 1; b <= 5; ++b) {
      const std::string path = dir + "/data_batch_" + std::to_string(b) + ".bin";
      decode_cifar_batch(detail::read_file(path), path, set);
    }
  } else {
    const std::string path = dir + "/test_batch.bin";
    decode_cifar_batch(detail::read_file(path), path, set);
  }
  check_labels(set);
  return set;
}

}  // namespace restocnet

#endif
