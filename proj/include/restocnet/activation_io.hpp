#ifndef RESTOCNET_ACTIVATION_IO_HPP
#define RESTOCNET_ACTIVATION_IO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "restocnet/error.hpp"

namespace restocnet {

/// Activation matrix: one f32 row per image.
struct ActivationSet {
  std::size_t count = 0, dim = 0;
  std::vector<float> values;  // count * dim, row-major
  std::vector<int> labels;    // count entries

  const float* row(std::size_t i) const { return values.data() + i * dim; }
};

/// Export format: "RSTA" magic, u32 count, u32 dim, then count rows of dim
/// little-endian f32. Labels go to a sibling CSV ("index,label").
inline void save_activations(const ActivationSet& set, const std::string& path,
                             const std::string& labels_csv_path) {
  require(set.values.size() == set.count * set.dim &&
              set.labels.size() == set.count,
          ErrorClass::Dimension, "activation set sizes are inconsistent");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorClass::Io, "cannot write activations: " + path);
  out.write("RSTA", 4);
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(set.count),
                                 static_cast<std::uint32_t>(set.dim)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(set.values.data()),
            static_cast<std::streamsize>(set.values.size() * 4));
  require(out.good(), ErrorClass::Io, "write failure: " + path);

  std::ofstream csv(labels_csv_path, std::ios::trunc);
  require(csv.good(), ErrorClass::Io, "cannot write labels: " + labels_csv_path);
  csv << "index,label\n";
  for (std::size_t i = 0; i < set.count; ++i)
    csv << i << "," << set.labels[i] << "\n";
  require(csv.good(), ErrorClass::Io, "write failure: " + labels_csv_path);
}

inline ActivationSet load_activations(const std::string& path,
                                      const std::string& labels_csv_path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorClass::Io, "cannot open activations: " + path);
  char magic[4];
  std::uint32_t dims[2];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  require(in.good() && std::memcmp(magic, "RSTA", 4) == 0, ErrorClass::Format,
          path + ": activation magic mismatch");
  ActivationSet set;
  set.count = dims[0];
  set.dim = dims[1];
  set.values.resize(set.count * set.dim);
  in.read(reinterpret_cast<char*>(set.values.data()),
          static_cast<std::streamsize>(set.values.size() * 4));
  require(in.good(), ErrorClass::Format, path + ": truncated activation payload");

  std::ifstream csv(labels_csv_path);
  require(csv.good(), ErrorClass::Io, "cannot open labels: " + labels_csv_path);
  std::string line;
  std::getline(csv, line);  // header
  set.labels.reserve(set.count);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    require(comma != std::string::npos, ErrorClass::Format,
            labels_csv_path + ": malformed CSV row");
    set.labels.push_back(std::stoi(line.substr(comma + 1)));
  }
  require(set.labels.size() == set.count, ErrorClass::Format,
          labels_csv_path + ": label count does not match activation count");
  return set;
}

}  // namespace restocnet

#endif
