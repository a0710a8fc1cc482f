#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "pnp/vec.hpp"

namespace pnp {

/// Raster image of attenuation values in [0, 1], row-major, row 0 at the top.
struct Phantom {
  int width = 0;
  int height = 0;
  Vec pixels;

  double at(int col, int row) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

struct PhantomEllipse {
  double x0, y0;      // center, in [-1, 1] coordinates
  double a, b;        // semi-axes
  double phi_deg;     // rotation
  double value;       // additive attenuation
};

/// The ten Shepp-Logan ellipses with the modified (Toft) intensity set.
inline const std::array<PhantomEllipse, 10>& shepp_logan_ellipses() {
  static const std::array<PhantomEllipse, 10> table = {{
      {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
      {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
      {0.22, 0.0, 0.11, 0.31, -18.0, -0.2},
      {-0.22, 0.0, 0.16, 0.41, 18.0, -0.2},
      {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
      {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
      {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},
      {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
      {0.0, -0.605, 0.023, 0.023, 0.0, 0.1},
      {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
  }};
  return table;
}

inline Phantom shepp_logan(int width, int height) {
  if (width < 8 || height < 8) throw InputError("shepp_logan: image must be at least 8x8");
  Phantom p{width, height, Vec(static_cast<std::size_t>(width) * height, 0.0)};
  for (int row = 0; row < height; ++row) {
    const double py = 1.0 - (row + 0.5) * 2.0 / height;
    for (int col = 0; col < width; ++col) {
      const double px = (col + 0.5) * 2.0 / width - 1.0;
      double v = 0.0;
      for (const PhantomEllipse& e : shepp_logan_ellipses()) {
        const double phi = e.phi_deg * std::numbers::pi / 180.0;
        const double dx = px - e.x0;
        const double dy = py - e.y0;
        const double u = std::cos(phi) * dx + std::sin(phi) * dy;
        const double w = -std::sin(phi) * dx + std::cos(phi) * dy;
        if ((u / e.a) * (u / e.a) + (w / e.b) * (w / e.b) <= 1.0) v += e.value;
      }
      p.pixels[static_cast<std::size_t>(row) * width + col] = std::clamp(v, 0.0, 1.0);
    }
  }
  return p;
}

}  // namespace pnp
