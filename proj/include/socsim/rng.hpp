#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace socsim {

/// Seeded generator whose draws are identical across standard libraries.
///
/// The engine is `std::mt19937_64`, whose output sequence is fixed by the
/// standard. The distribution helpers are implemented here rather than with
/// `<random>` distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). `n` must be positive.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Textual engine state, suitable for snapshots.
  std::string state() const;
  void restore(std::string_view state);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace socsim
