#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "pnp/vec.hpp"

namespace pnp {

/**
 * 16-bit binary PGM (P5, big-endian samples), linearly mapping [lo, hi] to
 * [0, 65535]. Meant for eyeballing; the float sidecar is the exact record.
 */
inline void write_pgm16(const std::filesystem::path& path, int width, int height,
                        const Vec& pixels, double lo, double hi) {
  check_size(pixels, static_cast<std::size_t>(width) * height, "write_pgm16");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("write_pgm16: cannot open " + path.string());
  out << "P5\n" << width << ' ' << height << "\n65535\n";
  const double span = (hi > lo) ? hi - lo : 1.0;
  for (double v : pixels) {
    const double t = std::clamp((v - lo) / span, 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    out.put(static_cast<char>(q >> 8));
    out.put(static_cast<char>(q & 0xff));
  }
}

/// Plain-text sidecar: "width height" header, then one row of reals per line.
inline void write_image_txt(const std::filesystem::path& path, int width, int height,
                            const Vec& pixels) {
  check_size(pixels, static_cast<std::size_t>(width) * height, "write_image_txt");
  std::ofstream out(path);
  if (!out) throw InputError("write_image_txt: cannot open " + path.string());
  out << width << ' ' << height << '\n';
  char buf[40];
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", pixels[static_cast<std::size_t>(r) * width + c]);
      out << buf << (c + 1 == width ? '\n' : ' ');
    }
  }
}

inline Vec read_image_txt(const std::filesystem::path& path, int& width, int& height) {
  std::ifstream in(path);
  if (!in) throw InputError("read_image_txt: cannot open " + path.string());
  if (!(in >> width >> height) || width < 1 || height < 1)
    throw InputError("read_image_txt: bad header in " + path.string());
  Vec pixels(static_cast<std::size_t>(width) * height);
  for (double& v : pixels)
    if (!(in >> v)) throw InputError("read_image_txt: truncated data in " + path.string());
  return pixels;
}

/// Writes both the PGM preview and the authoritative float sidecar.
inline void write_image(const std::filesystem::path& stem, int width, int height,
                        const Vec& pixels) {
  double lo = pixels.empty() ? 0.0 : *std::min_element(pixels.begin(), pixels.end());
  double hi = pixels.empty() ? 1.0 : *std::max_element(pixels.begin(), pixels.end());
  write_pgm16(std::filesystem::path(stem.string() + ".pgm"), width, height, pixels, lo, hi);
  write_image_txt(std::filesystem::path(stem.string() + ".txt"), width, height, pixels);
}

}  // namespace pnp
