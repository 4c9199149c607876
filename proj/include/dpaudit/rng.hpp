#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

namespace dpaudit {

// SplitMix64 step. Small, fast, and bit-reproducible on every platform;
// all sampling in the toolkit is built on top of this single primitive so
// that generated data is a pure function of (seed, stream name, indices).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Inverse standard normal CDF. Acklam's rational approximation refined with
// one Halley step against erfc, giving ~1e-15 absolute accuracy.
inline double inv_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -HUGE_VAL;
    if (p == 1.0) return HUGE_VAL;
    return NAN;
  }
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement.
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// A named, independent random stream. The state is derived from the master
// seed, a stream name, and up to two integer subscripts (cohort, profile, ...),
// so adding a new variable or reordering the sampling code never perturbs
// draws belonging to other streams.
class RngStream {
 public:
  RngStream(std::uint64_t master, std::string_view name, std::uint64_t a = 0,
            std::uint64_t b = 0) {
    state_ = master ^ 0x6a09e667f3bcc908ULL;
    mix(fnv1a64(name));
    mix(a + 0x3c6ef372fe94f82bULL);
    mix(b + 0xbb67ae8584caa73bULL);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer on [lo, hi], inclusive, unbiased by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit span
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % range);
  }

  bool bernoulli(double p) { return next_double() < p; }

  double normal(double mean = 0.0, double sd = 1.0) {
    // Inverse-CDF method: one uniform per draw, no internal spare state.
    double u = next_double();
    if (u <= 0.0) u = 0x1.0p-53;
    return mean + sd * inv_normal_cdf(u);
  }

  // Triangular law on [lo, hi] with the given mode.
  double triangular(double lo, double mode, double hi) {
    if (hi <= lo) return lo;
    const double u = next_double();
    const double cut = (mode - lo) / (hi - lo);
    if (u < cut) return lo + std::sqrt(u * (hi - lo) * (mode - lo));
    return hi - std::sqrt((1.0 - u) * (hi - lo) * (hi - mode));
  }

  // Normal truncated to [lo, hi] by inverse-CDF restriction.
  double truncated_normal(double mean, double sd, double lo, double hi) {
    const double flo = normal_cdf((lo - mean) / sd);
    const double fhi = normal_cdf((hi - mean) / sd);
    double u = flo + next_double() * (fhi - flo);
    u = std::clamp(u, 0x1.0p-53, 1.0 - 0x1.0p-53);
    const double x = mean + sd * inv_normal_cdf(u);
    return std::clamp(x, lo, hi);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), in selection order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, n);
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(
          uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n) - 1));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  void mix(std::uint64_t v) {
    state_ ^= v;
    state_ = splitmix64(state_);
  }

  std::uint64_t state_;
};

}  // namespace dpaudit
