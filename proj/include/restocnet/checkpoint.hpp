#ifndef RESTOCNET_CHECKPOINT_HPP
#define RESTOCNET_CHECKPOINT_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "restocnet/error.hpp"
#include "restocnet/mnist.hpp"

namespace restocnet {

/// CRC-32 (reflected, polynomial 0xEDB88320, init/xorout 0xFFFFFFFF).
inline std::uint32_t crc32(const unsigned char* data, std::size_t len,
                           std::uint32_t seed = 0) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = seed ^ 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i)
    crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

/// One bank of binary weights: `out` units, each connected to an
/// (in, height, width) block. Weights live in {w_low, w_high}; `bits`
/// stores one byte per weight (0 -> w_low, 1 -> w_high), indexed
/// ((j*in + i)*height + r)*width + c. Full-precision banks (ablation mode)
/// carry `real_weights` instead.
struct WeightBank {
  std::uint16_t out = 0, in = 0, height = 0, width = 0;
  float w_low = -1.0f, w_high = 1.0f;
  std::vector<std::uint8_t> bits;
  std::vector<float> real_weights;
  std::vector<float> thresholds;  // per output unit; empty if untrained
  std::vector<std::int32_t> tags; // per output unit; empty unless tagged

  std::size_t weight_count() const {
    return static_cast<std::size_t>(out) * in * height * width;
  }
  bool full_precision() const { return !real_weights.empty(); }
  float value(std::size_t j, std::size_t i, std::size_t r, std::size_t c) const {
    const std::size_t idx = ((j * in + i) * height + r) * width + c;
    return full_precision() ? real_weights[idx] : (bits[idx] ? w_high : w_low);
  }
};

/// Dense classifier layer (row-major `out x in` weights plus bias).
struct ClassifierLayer {
  std::uint32_t in = 0, out = 0;
  std::vector<float> weights;
  std::vector<float> bias;
};

struct Checkpoint {
  std::uint64_t seed = 0;
  std::string topology;  // e.g. "36C3-2P-1024FC-10FC"
  std::vector<WeightBank> banks;
  std::vector<ClassifierLayer> classifier;  // empty until the head is trained
};

namespace detail {

inline void put_bytes(std::vector<unsigned char>& buf, const void* p, std::size_t n) {
  const unsigned char* b = static_cast<const unsigned char*>(p);
  buf.insert(buf.end(), b, b + n);
}
template <typename T>
void put(std::vector<unsigned char>& buf, T v) {
  put_bytes(buf, &v, sizeof(T));  // little-endian host assumed (checked in tests)
}

struct Cursor {
  const unsigned char* p;
  std::size_t remaining;
  void take(void* dst, std::size_t n, const char* what) {
    require(remaining >= n, ErrorClass::Format,
            std::string("checkpoint truncated reading ") + what);
    std::memcpy(dst, p, n);
    p += n;
    remaining -= n;
  }
  template <typename T>
  T get(const char* what) {
    T v;
    take(&v, sizeof(T), what);
    return v;
  }
};

}  // namespace detail

/// Pack one byte-per-weight bits into 8 weights per byte, LSB first.
inline std::vector<std::uint8_t> pack_bits(const std::vector<std::uint8_t>& bits) {
  std::vector<std::uint8_t> packed((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) packed[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
  return packed;
}

inline std::vector<std::uint8_t> unpack_bits(const std::vector<std::uint8_t>& packed,
                                             std::size_t count) {
  std::vector<std::uint8_t> bits(count);
  for (std::size_t i = 0; i < count; ++i)
    bits[i] = (packed[i >> 3] >> (i & 7)) & 1u;
  return bits;
}

inline std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt) {
  using detail::put;
  std::vector<unsigned char> buf;
  detail::put_bytes(buf, "RSTC", 4);
  put<std::uint16_t>(buf, 1);  // version
  put<std::uint64_t>(buf, ckpt.seed);
  put<std::uint16_t>(buf, static_cast<std::uint16_t>(ckpt.topology.size()));
  detail::put_bytes(buf, ckpt.topology.data(), ckpt.topology.size());
  put<std::uint16_t>(buf, static_cast<std::uint16_t>(ckpt.banks.size()));
  for (const WeightBank& bank : ckpt.banks) {
    put(buf, bank.out);
    put(buf, bank.in);
    put(buf, bank.height);
    put(buf, bank.width);
    put(buf, bank.w_low);
    put(buf, bank.w_high);
    const std::uint8_t flags =
        static_cast<std::uint8_t>((bank.thresholds.empty() ? 0 : 1) |
                                  (bank.tags.empty() ? 0 : 2) |
                                  (bank.full_precision() ? 4 : 0));
    put(buf, flags);
    if (!bank.thresholds.empty()) {
      require(bank.thresholds.size() == bank.out, ErrorClass::Dimension,
              "threshold count does not match bank output count");
      detail::put_bytes(buf, bank.thresholds.data(), bank.thresholds.size() * 4);
    }
    if (!bank.tags.empty()) {
      require(bank.tags.size() == bank.out, ErrorClass::Dimension,
              "tag count does not match bank output count");
      detail::put_bytes(buf, bank.tags.data(), bank.tags.size() * 4);
    }
    if (bank.full_precision()) {
      require(bank.real_weights.size() == bank.weight_count(), ErrorClass::Dimension,
              "real weight count mismatch");
      detail::put_bytes(buf, bank.real_weights.data(), bank.real_weights.size() * 4);
    } else {
      require(bank.bits.size() == bank.weight_count(), ErrorClass::Dimension,
              "bit count mismatch");
      const std::vector<std::uint8_t> packed = pack_bits(bank.bits);
      detail::put_bytes(buf, packed.data(), packed.size());
    }
  }
  put<std::uint8_t>(buf, ckpt.classifier.empty() ? 0 : 1);
  if (!ckpt.classifier.empty()) {
    put<std::uint16_t>(buf, static_cast<std::uint16_t>(ckpt.classifier.size()));
    for (const ClassifierLayer& layer : ckpt.classifier) {
      put(buf, layer.in);
      put(buf, layer.out);
      require(layer.weights.size() ==
                  static_cast<std::size_t>(layer.in) * layer.out &&
              layer.bias.size() == layer.out,
              ErrorClass::Dimension, "classifier layer size mismatch");
      detail::put_bytes(buf, layer.weights.data(), layer.weights.size() * 4);
      detail::put_bytes(buf, layer.bias.data(), layer.bias.size() * 4);
    }
  }
  put<std::uint32_t>(buf, crc32(buf.data(), buf.size()));
  return buf;
}

inline Checkpoint parse_checkpoint(const std::vector<unsigned char>& buf) {
  require(buf.size() >= 20, ErrorClass::Format, "checkpoint too small");
  require(std::memcmp(buf.data(), "RSTC", 4) == 0, ErrorClass::Format,
          "checkpoint magic mismatch");
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  require(crc32(buf.data(), buf.size() - 4) == stored_crc, ErrorClass::Format,
          "checkpoint CRC mismatch");
  detail::Cursor cur{buf.data() + 4, buf.size() - 8};
  const auto version = cur.get<std::uint16_t>("version");
  require(version == 1, ErrorClass::Format,
          "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.seed = cur.get<std::uint64_t>("seed");
  const auto topo_len = cur.get<std::uint16_t>("topology length");
  ckpt.topology.resize(topo_len);
  cur.take(ckpt.topology.data(), topo_len, "topology");
  const auto nbanks = cur.get<std::uint16_t>("bank count");
  ckpt.banks.resize(nbanks);
  for (WeightBank& bank : ckpt.banks) {
    bank.out = cur.get<std::uint16_t>("bank out");
    bank.in = cur.get<std::uint16_t>("bank in");
    bank.height = cur.get<std::uint16_t>("bank height");
    bank.width = cur.get<std::uint16_t>("bank width");
    bank.w_low = cur.get<float>("w_low");
    bank.w_high = cur.get<float>("w_high");
    const auto flags = cur.get<std::uint8_t>("bank flags");
    if (flags & 1) {
      bank.thresholds.resize(bank.out);
      cur.take(bank.thresholds.data(), bank.out * 4u, "thresholds");
    }
    if (flags & 2) {
      bank.tags.resize(bank.out);
      cur.take(bank.tags.data(), bank.out * 4u, "tags");
    }
    if (flags & 4) {
      bank.real_weights.resize(bank.weight_count());
      cur.take(bank.real_weights.data(), bank.weight_count() * 4, "real weights");
    } else {
      std::vector<std::uint8_t> packed((bank.weight_count() + 7) / 8);
      cur.take(packed.data(), packed.size(), "kernel bits");
      bank.bits = unpack_bits(packed, bank.weight_count());
    }
  }
  if (cur.get<std::uint8_t>("classifier flag")) {
    const auto nlayers = cur.get<std::uint16_t>("classifier layer count");
    ckpt.classifier.resize(nlayers);
    for (ClassifierLayer& layer : ckpt.classifier) {
      layer.in = cur.get<std::uint32_t>("classifier in");
      layer.out = cur.get<std::uint32_t>("classifier out");
      layer.weights.resize(static_cast<std::size_t>(layer.in) * layer.out);
      layer.bias.resize(layer.out);
      cur.take(layer.weights.data(), layer.weights.size() * 4, "classifier weights");
      cur.take(layer.bias.data(), layer.bias.size() * 4, "classifier bias");
    }
  }
  require(cur.remaining == 0, ErrorClass::Format,
          "checkpoint has trailing bytes before CRC");
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::vector<unsigned char> buf = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorClass::Io, "cannot write checkpoint: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  require(out.good(), ErrorClass::Io, "write failure: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(detail::read_file(path));
}

}  // namespace restocnet

#endif
