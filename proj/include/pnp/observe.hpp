#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <vector>

#include "pnp/phantom.hpp"
#include "pnp/radon.hpp"
#include "pnp/rng.hpp"
#include "pnp/sparse_operator.hpp"

namespace pnp {

/**
 * Photon-count CT observation: counts yᵢ ~ Poisson(I₀ exp(−(Ax†)ᵢ)), the log
 * sinogram b̂ᵢ = ln(I₀ / max(yᵢ, 1)), and PWLS weights wᵢ = min(yᵢ/I₀, 1).
 * Rays with zero counts get weight 0, which drops fully attenuated rays
 * from the fit.
 */
struct CtObservation {
  std::vector<std::int64_t> counts;
  double I0 = 0.0;
  Vec log_sino;
  Vec weights;
};

inline CtObservation poisson_observe(const SparseOperator& op, const Phantom& x_true,
                                     double I0, SamplerRng& rng) {
  if (!(I0 > 0.0)) throw InputError("poisson_observe: I0 must be positive");
  const Vec proj = op.apply(x_true.pixels);
  for (double p : proj)
    if (!std::isfinite(p) || p < -700.0 || p > 700.0)
      throw NumericError("poisson_observe: projection out of range, exp would overflow");
  CtObservation obs;
  obs.I0 = I0;
  const int n = op.rows();
  obs.counts.resize(n);
  obs.log_sino.resize(n);
  obs.weights.resize(n);
  const double log_I0 = std::log(I0);
  for (int i = 0; i < n; ++i) {
    const std::int64_t y = rng.poisson(I0 * std::exp(-proj[i]));
    obs.counts[i] = y;
    obs.log_sino[i] = log_I0 - std::log(static_cast<double>(std::max<std::int64_t>(y, 1)));
    obs.weights[i] = std::min(static_cast<double>(y) / I0, 1.0);
  }
  return obs;
}

/// CSV columns: angle_index, detector_index, count, log_sino, weight.
inline void write_observation_csv(const CtObservation& obs, const CtGeometry& geom,
                                  std::ostream& out) {
  out << "angle_index,detector_index,count,log_sino,weight\n";
  char buf[80];
  for (int a = 0; a < geom.num_angles; ++a)
    for (int det = 0; det < geom.num_detectors; ++det) {
      const int i = a * geom.num_detectors + det;
      std::snprintf(buf, sizeof(buf), "%d,%d,%lld,%.17g,%.17g", a, det,
                    static_cast<long long>(obs.counts[i]), obs.log_sino[i], obs.weights[i]);
      out << buf << '\n';
    }
}

}  // namespace pnp
