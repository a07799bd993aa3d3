#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace ftn {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow; exact for -inf arguments.
inline double logaddexp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  const double d = lo - hi;
  if (d < -45.0) return hi;  // below double resolution of log1p(exp(d))
  return hi + std::log1p(std::exp(d));
}

inline double logsumexp(std::span<const double> xs) {
  double hi = kNegInf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

// Gaussian tail probability P(X > x), X ~ N(0,1).
inline double q_function(double x) {
  return 0.5 * std::erfc(x / std::sqrt(2.0));
}

// Half-width of the Wilson score interval for a binomial proportion.
inline double wilson_halfwidth(std::uint64_t errors, std::uint64_t trials,
                               double z = 1.96) {
  if (trials == 0) return 0.0;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(errors) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double half =
      (z / denom) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return half;
}

// splitmix64 step, used to derive decorrelated seed streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d4a2ca9f6a4db9ULL ^ (z >> 31);
  return z;
}

inline std::uint64_t fnv1a(std::string_view s,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t v, std::uint64_t h) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffULL;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic per-block seed: decorrelates master seed, a point tag and a
// block index so that sweeps over grids reuse no stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t point_tag,
                                 std::uint64_t block) {
  std::uint64_t s = master ^ 0x6a09e667f3bcc908ULL;
  s = splitmix64(s) ^ point_tag;
  s = splitmix64(s) ^ block;
  return splitmix64(s);
}

// Packs a +/-1 sequence into words for cheap dedup keys (+1 -> bit 1).
inline std::vector<std::uint64_t> pack_signs(std::span<const double> a) {
  std::vector<std::uint64_t> key((a.size() + 63) / 64, 0);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > 0.0) key[i / 64] |= 1ULL << (i % 64);
  return key;
}

inline double bit_to_symbol(int bit) { return bit ? -1.0 : 1.0; }
inline int symbol_to_bit(double s) { return s > 0.0 ? 0 : 1; }

}  // namespace ftn
