#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numbers>
#include <optional>
#include <vector>

#include "pnp/rng.hpp"
#include "pnp/vec.hpp"

namespace pnp {

/// Anything that maps an image vector to an image vector of the same length.
template <typename D>
concept ImageMap = requires(const D& d, const Vec& v) {
  { d.apply(v) } -> std::same_as<Vec>;
};

enum class DenoiserKind { identity, blend, gaussian, median, nlm };
enum class BlurKind { gaussian, box };

namespace detail {

inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Separable blur with reflection (edge-repeating) padding; the resulting
// linear map is symmetric, and constant images are exact fixed points.
inline Vec separable_blur(const Vec& x, int width, int height, const std::vector<double>& kernel) {
  const int r = static_cast<int>(kernel.size()) / 2;
  Vec tmp(x.size()), out(x.size());
  for (int y = 0; y < height; ++y)
    for (int c = 0; c < width; ++c) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t)
        s += kernel[t + r] * x[static_cast<std::size_t>(y) * width + reflect_index(c + t, width)];
      tmp[static_cast<std::size_t>(y) * width + c] = s;
    }
  for (int y = 0; y < height; ++y)
    for (int c = 0; c < width; ++c) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t)
        s += kernel[t + r] * tmp[static_cast<std::size_t>(reflect_index(y + t, height)) * width + c];
      out[static_cast<std::size_t>(y) * width + c] = s;
    }
  return out;
}

inline std::vector<double> blur_kernel(BlurKind kind, double param) {
  if (kind == BlurKind::box) {
    const int r = std::max(0, static_cast<int>(std::lround(param)));
    return std::vector<double>(2 * r + 1, 1.0 / (2 * r + 1));
  }
  const double sigma = param;
  if (sigma <= 0.0) return {1.0};
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int t = -r; t <= r; ++t) sum += k[t + r] = std::exp(-0.5 * t * t / (sigma * sigma));
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace detail

/**
 * Image denoiser D(.), one of:
 *   identity                — D(x) = x, residual-Lipschitz beta = 0
 *   blend(theta, blur)      — D(x) = (1-theta) x + theta G(x); linear, with a
 *                             certified beta = theta ||G - I||_2 computed at
 *                             construction (power iteration, deterministic)
 *   gaussian(sigma)         — separable Gaussian blur, reflection padding
 *   median(radius)          — square-window median
 *   nlm(patch, window, h)   — non-local means: weighted patch average with
 *                             weights exp(-patch_dist^2 / h^2)
 *
 * Instances are immutable and thread-safe.
 */
class Denoiser {
 public:
  static Denoiser identity(int width, int height) {
    Denoiser d(DenoiserKind::identity, width, height);
    d.beta_analytic_ = 0.0;
    return d;
  }

  static Denoiser blend(int width, int height, double theta, BlurKind blur, double blur_param) {
    if (theta < 0.0 || theta > 1.0) throw InputError("blend: theta must lie in [0, 1]");
    Denoiser d(DenoiserKind::blend, width, height);
    d.theta_ = theta;
    d.kernel_ = detail::blur_kernel(blur, blur_param);
    d.beta_analytic_ = theta * d.blur_residual_norm();
    return d;
  }

  /// Blend calibrated so that the certified beta equals beta_target.
  static Denoiser blend_with_beta(int width, int height, BlurKind blur, double blur_param,
                                  double beta_target) {
    Denoiser probe = blend(width, height, 1.0, blur, blur_param);
    const double full = *probe.beta_analytic_;
    if (full <= 0.0) throw InputError("blend_with_beta: blur equals identity, beta not tunable");
    const double theta = beta_target / full;
    if (theta < 0.0 || theta > 1.0)
      throw InputError("blend_with_beta: beta_target out of reachable range");
    Denoiser d = blend(width, height, theta, blur, blur_param);
    d.beta_analytic_ = beta_target;
    return d;
  }

  static Denoiser gaussian(int width, int height, double sigma) {
    if (sigma < 0.0) throw InputError("gaussian denoiser: sigma must be >= 0");
    Denoiser d(DenoiserKind::gaussian, width, height);
    d.kernel_ = detail::blur_kernel(BlurKind::gaussian, sigma);
    return d;
  }

  static Denoiser median(int width, int height, int radius) {
    if (radius < 0) throw InputError("median denoiser: radius must be >= 0");
    Denoiser d(DenoiserKind::median, width, height);
    d.radius_ = radius;
    return d;
  }

  static Denoiser nlm(int width, int height, int patch_radius, int window_radius, double h) {
    if (patch_radius < 0 || window_radius < 1 || h <= 0.0)
      throw InputError("nlm denoiser: need patch_radius >= 0, window_radius >= 1, h > 0");
    Denoiser d(DenoiserKind::nlm, width, height);
    d.patch_radius_ = patch_radius;
    d.window_radius_ = window_radius;
    d.h_ = h;
    return d;
  }

  DenoiserKind kind() const { return kind_; }
  int width() const { return width_; }
  int height() const { return height_; }
  std::optional<double> beta_analytic() const { return beta_analytic_; }
  double theta() const { return theta_; }

  Vec apply(const Vec& x) const {
    check_size(x, static_cast<std::size_t>(width_) * height_, "Denoiser::apply");
    if (!all_finite(x)) throw NumericError("Denoiser::apply: non-finite input");
    switch (kind_) {
      case DenoiserKind::identity:
        return x;
      case DenoiserKind::blend: {
        if (kernel_.size() == 1) return x;  // G = I, residual exactly zero
        Vec g = detail::separable_blur(x, width_, height_, kernel_);
        Vec out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = (1.0 - theta_) * x[i] + theta_ * g[i];
        return out;
      }
      case DenoiserKind::gaussian:
        return detail::separable_blur(x, width_, height_, kernel_);
      case DenoiserKind::median:
        return apply_median(x);
      case DenoiserKind::nlm:
        return apply_nlm(x);
    }
    throw InputError("Denoiser::apply: unknown kind");
  }

 private:
  Denoiser(DenoiserKind kind, int width, int height) : kind_(kind), width_(width), height_(height) {
    if (width < 1 || height < 1) throw InputError("Denoiser: empty image shape");
  }

  // ||G - I||_2 of the separable blur, in closed form: the half-sample
  // symmetric padding makes each 1D pass diagonal in the DCT-II basis with
  // eigenvalues k_0 + 2 sum_t k_t cos(pi k t / n), so the 2D spectrum is the
  // product grid.
  double blur_residual_norm() const {
    const int r = static_cast<int>(kernel_.size()) / 2;
    if (r >= std::min(width_, height_))
      throw InputError("blend: blur kernel radius must be smaller than the image");
    auto axis_eigs = [&](int n) {
      std::vector<double> lam(n);
      for (int k = 0; k < n; ++k) {
        double s = kernel_[r];
        for (int t = 1; t <= r; ++t)
          s += 2.0 * kernel_[r + t] * std::cos(std::numbers::pi * k * t / n);
        lam[k] = s;
      }
      return lam;
    };
    const std::vector<double> lx = axis_eigs(width_);
    const std::vector<double> ly = axis_eigs(height_);
    double worst = 0.0;
    for (double a : lx)
      for (double b : ly) worst = std::max(worst, std::fabs(a * b - 1.0));
    return worst;
  }

  Vec apply_median(const Vec& x) const {
    Vec out(x.size());
    std::vector<double> window((2 * radius_ + 1) * (2 * radius_ + 1));
    for (int y = 0; y < height_; ++y)
      for (int c = 0; c < width_; ++c) {
        std::size_t m = 0;
        for (int ty = -radius_; ty <= radius_; ++ty)
          for (int tx = -radius_; tx <= radius_; ++tx)
            window[m++] = x[static_cast<std::size_t>(detail::reflect_index(y + ty, height_)) * width_ +
                            detail::reflect_index(c + tx, width_)];
        auto mid = window.begin() + static_cast<std::ptrdiff_t>(m / 2);
        std::nth_element(window.begin(), mid, window.begin() + static_cast<std::ptrdiff_t>(m));
        out[static_cast<std::size_t>(y) * width_ + c] = *mid;
      }
    return out;
  }

  Vec apply_nlm(const Vec& x) const {
    const int P = patch_radius_, W = window_radius_;
    // Reflected coordinate tables so the hot loops stay branch-free.
    const int pad = W + P;
    std::vector<int> xmap(width_ + 2 * pad), ymap(height_ + 2 * pad);
    for (int i = 0; i < static_cast<int>(xmap.size()); ++i)
      xmap[i] = detail::reflect_index(i - pad, width_);
    for (int i = 0; i < static_cast<int>(ymap.size()); ++i)
      ymap[i] = detail::reflect_index(i - pad, height_);
    auto pix = [&](int cx, int cy) {
      return x[static_cast<std::size_t>(ymap[cy + pad]) * width_ + xmap[cx + pad]];
    };
    const double patch_count = (2 * P + 1) * (2 * P + 1);
    const double inv_h2 = 1.0 / (h_ * h_);
    Vec out(x.size());
    for (int y = 0; y < height_; ++y)
      for (int c = 0; c < width_; ++c) {
        double wsum = 0.0, acc = 0.0;
        for (int qy = y - W; qy <= y + W; ++qy)
          for (int qx = c - W; qx <= c + W; ++qx) {
            double d2 = 0.0;
            for (int ty = -P; ty <= P; ++ty)
              for (int tx = -P; tx <= P; ++tx) {
                const double diff = pix(c + tx, y + ty) - pix(qx + tx, qy + ty);
                d2 += diff * diff;
              }
            const double w = std::exp(-d2 / patch_count * inv_h2);
            wsum += w;
            acc += w * pix(qx, qy);
          }
        out[static_cast<std::size_t>(y) * width_ + c] = acc / wsum;
      }
    return out;
  }

  DenoiserKind kind_;
  int width_;
  int height_;
  double theta_ = 0.0;
  std::vector<double> kernel_;
  int radius_ = 0;
  int patch_radius_ = 0;
  int window_radius_ = 0;
  double h_ = 0.0;
  std::optional<double> beta_analytic_;
};

/// Denoiser scaling D_gamma(x) = (1/gamma) D(gamma x).
class ScaledDenoiser {
 public:
  ScaledDenoiser(Denoiser base, double gamma) : base_(std::move(base)), gamma_(gamma) {
    if (!(gamma > 0.0)) throw InputError("ScaledDenoiser: gamma must be positive");
  }

  const Denoiser& base() const { return base_; }
  double gamma() const { return gamma_; }

  Vec apply(const Vec& x) const {
    Vec y = base_.apply(scaled(x, gamma_));
    scale(y, 1.0 / gamma_);
    return y;
  }

 private:
  Denoiser base_;
  double gamma_;
};

/**
 * Sampled lower bound on the residual-Lipschitz constant beta of D - I:
 * max over probe pairs (x, x + delta) of ||(D-I)x - (D-I)y|| / ||x - y||.
 * Perturbation magnitudes sweep 1e-3..1e-1 of each probe's dynamic range, and
 * each pair's direction is refined by a few finite-difference power-iteration
 * steps, which drives delta toward the worst direction of the local residual
 * Jacobian (for a linear denoiser this converges to the operator norm).
 * Always a lower bound on the true beta.
 */
template <ImageMap D>
double estimate_beta(const D& den, const std::vector<Vec>& probes, SamplerRng& rng,
                     int num_pairs) {
  if (probes.empty() || num_pairs < 1)
    throw InputError("estimate_beta: need at least one probe and one pair");
  static constexpr double mags[] = {1e-3, 1e-2, 1e-1};
  constexpr int refine_steps = 8;
  double beta = 0.0;
  for (int p = 0; p < num_pairs; ++p) {
    const Vec& x = probes[p % probes.size()];
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const double range = (*hi > *lo) ? *hi - *lo : 1.0;
    const double mag = mags[p % 3] * range;
    const Vec rx = sub(den.apply(x), x);
    Vec delta = rng.unit_vec(x.size());
    scale(delta, mag);
    for (int step = 0; step <= refine_steps; ++step) {
      const Vec y = add(x, delta);
      Vec diff = sub(den.apply(y), y);
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= rx[i];
      const double ratio = norm(diff) / norm(delta);
      beta = std::max(beta, ratio);
      if (ratio == 0.0) break;
      scale(diff, mag / norm(diff));
      delta = std::move(diff);
    }
  }
  return beta;
}

}  // namespace pnp
