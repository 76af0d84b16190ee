#ifndef RESTOCNET_PGM_HPP
#define RESTOCNET_PGM_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "restocnet/checkpoint.hpp"
#include "restocnet/error.hpp"

namespace restocnet {

/// Write an 8-bit binary PGM (P5) image.
inline void write_pgm(const std::string& path, std::size_t width, std::size_t height,
                      const std::vector<std::uint8_t>& pixels) {
  require(pixels.size() == width * height, ErrorClass::Dimension,
          "pixel buffer does not match PGM dimensions");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorClass::Io, "cannot write PGM: " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  require(out.good(), ErrorClass::Io, "write failure: " + path);
}

/// Tile a weight bank into one PGM: one row of cells per output unit, one
/// column per input channel, 1-pixel separators; w_low -> 0, w_high -> 255.
/// Full-precision banks are linearly mapped from [w_low, w_high].
inline void export_bank_pgm(const WeightBank& bank, const std::string& path) {
  const std::size_t cell_h = bank.height + 1, cell_w = bank.width + 1;
  const std::size_t height = bank.out * cell_h + 1, width = bank.in * cell_w + 1;
  std::vector<std::uint8_t> pixels(width * height, 128);
  for (std::size_t j = 0; j < bank.out; ++j)
    for (std::size_t i = 0; i < bank.in; ++i)
      for (std::size_t r = 0; r < bank.height; ++r)
        for (std::size_t c = 0; c < bank.width; ++c) {
          const float v = bank.value(j, i, r, c);
          const float unit = (v - bank.w_low) / (bank.w_high - bank.w_low);
          const float clamped = unit < 0.0f ? 0.0f : (unit > 1.0f ? 1.0f : unit);
          pixels[(j * cell_h + 1 + r) * width + (i * cell_w + 1 + c)] =
              static_cast<std::uint8_t>(clamped * 255.0f + 0.5f);
        }
  write_pgm(path, width, height, pixels);
}

/// Tile square receptive fields (one `side x side` image per output unit)
/// into a near-square grid, as used for fully-connected weight visualizations.
inline void export_receptive_fields_pgm(const WeightBank& bank, std::size_t side,
                                        const std::string& path) {
  require(static_cast<std::size_t>(bank.in) * bank.height * bank.width == side * side,
          ErrorClass::Dimension, "bank rows are not side*side receptive fields");
  std::size_t grid = 1;
  while (grid * grid < bank.out) ++grid;
  const std::size_t rows = (bank.out + grid - 1) / grid;
  const std::size_t cell = side + 1;
  const std::size_t width = grid * cell + 1, height = rows * cell + 1;
  std::vector<std::uint8_t> pixels(width * height, 128);
  for (std::size_t n = 0; n < bank.out; ++n) {
    const std::size_t gy = n / grid, gx = n % grid;
    for (std::size_t p = 0; p < side * side; ++p) {
      const std::size_t idx = n * side * side + p;
      const float v = bank.full_precision() ? bank.real_weights[idx]
                                            : (bank.bits[idx] ? bank.w_high : bank.w_low);
      const float unit = (v - bank.w_low) / (bank.w_high - bank.w_low);
      const float clamped = unit < 0.0f ? 0.0f : (unit > 1.0f ? 1.0f : unit);
      pixels[(gy * cell + 1 + p / side) * width + (gx * cell + 1 + p % side)] =
          static_cast<std::uint8_t>(clamped * 255.0f + 0.5f);
    }
  }
  write_pgm(path, width, height, pixels);
}

}  // namespace restocnet

#endif
