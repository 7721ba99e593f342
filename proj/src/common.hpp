#pragma once

// Shared infrastructure: error types, deterministic RNG, small numeric helpers.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kohdesign {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller handed us something malformed (bad dimension, bad name, bad config).
struct InvalidArgument : Error {
  using Error::Error;
};

// A numeric routine failed in a way that indicates broken inputs or a broken
// factorization (Cholesky failure after the jitter ladder, NaN objective, ...).
struct NumericError : Error {
  using Error::Error;
};

// A candidate design point was rejected (near-duplicate of an existing row or
// Schur complement below threshold).  Distinct from NumericError so callers
// can fall back to another candidate instead of aborting.
struct CandidateRejected : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// mt19937_64 output is fully specified by the standard, but the standard
// distributions are not, so uniform/normal are generated here directly to keep
// results byte-identical across platforms and compilers.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent stream from (seed, a, b); used to give every
// (mc iteration, strategy, purpose) tuple its own reproducible stream.
inline std::uint64_t seed_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(seed ^ splitmix64(a ^ splitmix64(b)));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n) {
    // Rejection-free modulo is fine here: n is tiny compared to 2^64.
    return static_cast<std::size_t>(eng_() % n);
  }

  // Standard normal via Box-Muller (pair cached for determinism and speed).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kohdesign
