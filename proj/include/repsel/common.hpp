#pragma once

// Shared plumbing: error types, portable RNG helpers, small vector math,
// deterministic parallel loops and content digests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace repsel {

/// Base class for everything this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data or arguments violate a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A file could not be parsed. `offset()` is a byte offset for binary
/// formats and a 1-based line number for text formats.
class FormatError : public ValidationError {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : ValidationError(what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Random numbers. std::mt19937_64 is fully specified by the standard; the
// distributions in <random> are not, so the few we need are written out here
// to keep seeded output identical across standard libraries.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

/// Standard normal via Box-Muller (one value per call, the twin is dropped).
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Fisher-Yates shuffle with the portable index sampler.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

/// `count` distinct positions from [0, n), in sampling order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count,
                                                           Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(pool[i], pool[i + uniform_index(rng, n - i)]);
  }
  pool.resize(count);
  return pool;
}

// ---------------------------------------------------------------------------
// Vector math. Accumulation is in double over four fixed lanes, combined
// as (l0 + l1) + (l2 + l3); the order never depends on the data, so equal
// inputs give bit-identical results.
// ---------------------------------------------------------------------------

// A and B are any contiguous containers or spans of arithmetic values.

template <typename A, typename B>
double dot(const A& a, const B& b) {
  const std::size_t n = a.size();
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    l1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
    l2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
    l3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
  }
  for (; i < n; ++i) l0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return (l0 + l1) + (l2 + l3);
}

template <typename A>
double norm(const A& a) {
  return std::sqrt(dot(a, a));
}

template <typename A, typename B>
double squared_distance(const A& a, const B& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

/// Cosine similarity; zero vectors yield 0.
template <typename A, typename B>
double cosine_similarity(const A& a, const B& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

/// Unit-length copy in double. Throws on a zero or non-finite vector.
template <typename A>
std::vector<double> unit_vector(const A& a) {
  const double n = norm(a);
  if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("cannot normalize a zero or non-finite vector");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<double>(a[i]) / n;
  return out;
}

inline bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// Parallel loop. Work is split into contiguous blocks; callers write results
// into pre-sized slots so output never depends on scheduling.
// ---------------------------------------------------------------------------

template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(jobs, n);
  const std::size_t block = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * block;
    const std::size_t hi = std::min(n, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
}

// ---------------------------------------------------------------------------
// Digest (FNV-1a, 64 bit) used for provenance of sets and classifiers.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return s;
}

/// Ceiling of fraction * n, clamped to [0, n]. Guards against 0.3 * 10
/// landing a hair above 3.
inline std::size_t budget_count(double fraction, std::size_t n) {
  const double raw = fraction * static_cast<double>(n);
  const double snapped = std::nearbyint(raw);
  const double value = std::fabs(raw - snapped) < 1e-9 ? snapped : std::ceil(raw);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, value)));
}

}  // namespace repsel
