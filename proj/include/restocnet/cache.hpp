#ifndef RESTOCNET_CACHE_HPP
#define RESTOCNET_CACHE_HPP

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "restocnet/error.hpp"
#include "restocnet/mnist.hpp"
#include "restocnet/tensor.hpp"

namespace restocnet {

/// Preprocessed-tensor cache: "RSTP" magic, u32 (n, c, h, w), then n*c*h*w
/// little-endian f32 values.
inline void save_tensor_cache(const Tensor4<float>& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorClass::Io, "cannot write cache: " + path);
  out.write("RSTP", 4);
  const std::uint32_t dims[4] = {
      static_cast<std::uint32_t>(t.n), static_cast<std::uint32_t>(t.c),
      static_cast<std::uint32_t>(t.h), static_cast<std::uint32_t>(t.w)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * 4));
  require(out.good(), ErrorClass::Io, "write failure: " + path);
}

inline Tensor4<float> load_tensor_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorClass::Io, "cannot open cache: " + path);
  char magic[4];
  std::uint32_t dims[4];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  require(in.good() && std::memcmp(magic, "RSTP", 4) == 0, ErrorClass::Format,
          path + ": cache magic mismatch");
  Tensor4<float> t(dims[0], dims[1], dims[2], dims[3]);
  in.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * 4));
  require(in.good(), ErrorClass::Format, path + ": truncated cache payload");
  return t;
}

inline bool file_exists(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return in.good();
}

inline void ensure_dir(const std::string& path) {
  if (path.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  require(!ec, ErrorClass::Io, "cannot create directory: " + path);
}

}  // namespace restocnet

#endif
