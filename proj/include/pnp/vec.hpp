#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pnp {

using Vec = std::vector<double>;

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check_size(const Vec& v, std::size_t expected, const char* what) {
  if (v.size() != expected)
    throw InputError(std::string(what) + ": expected length " +
                     std::to_string(expected) + ", got " + std::to_string(v.size()));
}

inline double dot(const Vec& a, const Vec& b) {
  check_size(b, a.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(const Vec& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(norm_sq(a)); }

/// y += alpha * x
inline void axpy(double alpha, const Vec& x, Vec& y) {
  check_size(y, x.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(Vec& x, double alpha) {
  for (double& v : x) v *= alpha;
}

inline Vec scaled(const Vec& x, double alpha) {
  Vec y = x;
  scale(y, alpha);
  return y;
}

inline Vec add(const Vec& a, const Vec& b) {
  check_size(b, a.size(), "add");
  Vec c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

inline Vec sub(const Vec& a, const Vec& b) {
  check_size(b, a.size(), "sub");
  Vec c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
  return c;
}

inline double dist(const Vec& a, const Vec& b) { return norm(sub(a, b)); }

inline bool all_finite(const Vec& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

inline Vec zeros(std::size_t n) { return Vec(n, 0.0); }

}  // namespace pnp
