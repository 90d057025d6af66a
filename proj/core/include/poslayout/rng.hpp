#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace poslayout {

// Deterministic random source: mt19937_64 plus hand-rolled distributions, so
// streams are identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; generates pairs, caches the second.
  double gaussian();

  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);

  // Uniformly distributed point on the unit sphere in R^dim.
  std::vector<double> unit_vector(int dim);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace poslayout
