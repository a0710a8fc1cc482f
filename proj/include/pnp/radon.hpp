#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "pnp/sparse_operator.hpp"
#include "pnp/vec.hpp"

namespace pnp {

/**
 * Parallel-beam acquisition geometry. Angles are uniformly spaced over [0, π);
 * at angle 0 the rays run horizontally (+x), and the detector axis is the ray
 * normal. Pixel size is 1; detector offsets are centered on the image.
 */
struct CtGeometry {
  int num_angles = 0;
  int num_detectors = 0;
  double detector_spacing = 1.0;
  std::vector<double> angles;

  int num_rays() const { return num_angles * num_detectors; }
};

inline CtGeometry make_parallel_geometry(int num_angles, int num_detectors,
                                         double detector_spacing = 1.0) {
  if (num_angles < 1 || num_detectors < 1)
    throw InputError("make_parallel_geometry: counts must be positive");
  CtGeometry g{num_angles, num_detectors, detector_spacing, {}};
  g.angles.resize(num_angles);
  for (int a = 0; a < num_angles; ++a) g.angles[a] = std::numbers::pi * a / num_angles;
  return g;
}

/// Detector count covering the image diagonal at unit spacing.
inline int default_detector_count(int width) {
  return static_cast<int>(std::ceil(std::numbers::sqrt2 * width));
}

namespace detail {

// Siddon-style traversal: exact intersection length of one ray with each pixel.
// Pixel (col i, row j) covers [xmin+i, xmin+i+1] x [ymax-j-1, ymax-j].
inline void trace_ray(double ox, double oy, double dx, double dy, int width, int height,
                      int ray_index, std::vector<Triplet>& out) {
  const double xmin = -0.5 * width, xmax = 0.5 * width;
  const double ymin = -0.5 * height, ymax = 0.5 * height;
  const double inf = std::numeric_limits<double>::infinity();

  double t0 = -inf, t1 = inf;
  auto clip = [&](double o, double d, double lo, double hi) {
    if (std::fabs(d) < 1e-14) return o >= lo && o <= hi;
    double ta = (lo - o) / d, tb = (hi - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    return true;
  };
  if (!clip(ox, dx, xmin, xmax) || !clip(oy, dy, ymin, ymax) || t0 >= t1) return;

  // Next grid-plane crossing in each axis, strictly after t.
  auto first_crossing = [](double o, double d, double lo, double t) {
    if (std::fabs(d) < 1e-14) return std::numeric_limits<double>::infinity();
    const double pos = o + t * d - lo;
    double k = (d > 0) ? std::ceil(pos) : std::floor(pos);
    if (k == pos) k += (d > 0) ? 1.0 : -1.0;
    return (lo + k - o) / d;
  };
  double tx = first_crossing(ox, dx, xmin, t0);
  double ty = first_crossing(oy, dy, ymin, t0);
  const double step_x = (std::fabs(dx) < 1e-14) ? inf : 1.0 / std::fabs(dx);
  const double step_y = (std::fabs(dy) < 1e-14) ? inf : 1.0 / std::fabs(dy);

  double t = t0;
  while (t < t1 - 1e-12) {
    const double tn = std::min({tx, ty, t1});
    const double len = tn - t;
    if (len > 1e-12) {
      const double mx = ox + 0.5 * (t + tn) * dx;
      const double my = oy + 0.5 * (t + tn) * dy;
      const int col = static_cast<int>(std::floor(mx - xmin));
      const int row_from_top = height - 1 - static_cast<int>(std::floor(my - ymin));
      if (col >= 0 && col < width && row_from_top >= 0 && row_from_top < height)
        out.push_back({ray_index, row_from_top * width + col, len});
    }
    if (tn == tx) tx += step_x;
    if (tn == ty) ty += step_y;
    t = tn;
  }
}

}  // namespace detail

/**
 * Assembles the parallel-beam Radon operator by ray tracing; row i holds the
 * intersection lengths of ray i with every pixel. Ray index is
 * angle_index * num_detectors + detector_index.
 */
inline SparseOperator build_radon(const CtGeometry& geom, int width, int height) {
  if (width < 1 || height < 1) throw InputError("build_radon: empty image");
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(geom.num_rays()) * std::max(width, height) / 2);
  for (int a = 0; a < geom.num_angles; ++a) {
    const double theta = geom.angles[a];
    const double dx = std::cos(theta), dy = std::sin(theta);
    for (int det = 0; det < geom.num_detectors; ++det) {
      const double s = (det - 0.5 * (geom.num_detectors - 1)) * geom.detector_spacing;
      detail::trace_ray(-s * dy, s * dx, dx, dy, width, height,
                        a * geom.num_detectors + det, entries);
    }
  }
  return SparseOperator(geom.num_rays(), width * height, std::move(entries));
}

}  // namespace pnp
