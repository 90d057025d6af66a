#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "poslayout/layout.hpp"
#include "poslayout/oracle.hpp"
#include "poslayout/rng.hpp"

using namespace poslayout;

namespace {

// Textbook evaluation of a placement: worst distance from any context
// position in 1..chunk_len to its nearest placed id.  Written independently
// of the library so the two implementations check each other.
std::int64_t direct_minimax(int chunk_len, const std::vector<std::int64_t>& placed) {
  std::int64_t worst = 0;
  for (std::int64_t c = 1; c <= chunk_len; ++c) {
    std::int64_t best = chunk_len;
    for (const auto m : placed) best = std::min<std::int64_t>(best, std::llabs(c - m));
    worst = std::max(worst, best);
  }
  return worst;
}

// Exhaustive enumeration of every M-subset of 1..L, no pruning at all.
std::int64_t exhaustive_optimal(int chunk_len, int memory_count) {
  std::vector<std::int64_t> placed(memory_count);
  std::int64_t best = chunk_len;
  const auto recurse = [&](auto&& self, int slot, std::int64_t from) -> void {
    if (slot == memory_count) {
      best = std::min(best, direct_minimax(chunk_len, placed));
      return;
    }
    for (std::int64_t v = from; v <= chunk_len; ++v) {
      placed[slot] = v;
      self(self, slot + 1, v + 1);
    }
  };
  recurse(recurse, 0, 1);
  return best;
}

}  // namespace

TEST_CASE("search optimum matches unpruned enumeration up to L = 12") {
  for (int L = 1; L <= 12; ++L) {
    for (int M = 1; M <= L; ++M) {
      CAPTURE(L);
      CAPTURE(M);
      CHECK(brute_force_optimal_minimax(L, M).optimal_value == exhaustive_optimal(L, M));
    }
  }
}

TEST_CASE("witness is a valid placement achieving the optimum") {
  for (int L = 1; L <= 20; ++L) {
    for (int M = 1; M <= L; ++M) {
      CAPTURE(L);
      CAPTURE(M);
      const OracleResult res = brute_force_optimal_minimax(L, M);
      REQUIRE(res.witness.size() == static_cast<std::size_t>(M));
      for (std::size_t i = 0; i < res.witness.size(); ++i) {
        CHECK(res.witness[i] >= 1);
        CHECK(res.witness[i] <= L);
        if (i > 0) CHECK(res.witness[i] > res.witness[i - 1]);
      }
      CHECK(direct_minimax(L, res.witness) == res.optimal_value);
    }
  }
}

TEST_CASE("uniform placement achieves the optimum for every L, M up to 20") {
  for (int L = 1; L <= 20; ++L) {
    for (int M = 1; M <= L; ++M) {
      CAPTURE(L);
      CAPTURE(M);
      const auto placed = uniform_memory_positions(1, L, M);
      CHECK(direct_minimax(L, placed) == brute_force_optimal_minimax(L, M).optimal_value);
    }
  }
}

TEST_CASE("optimum equals floor(ceil(L / M) / 2)") {
  for (int L = 1; L <= 20; ++L) {
    for (int M = 1; M <= L; ++M) {
      CAPTURE(L);
      CAPTURE(M);
      const std::int64_t formula = ((L + M - 1) / M) / 2;
      CHECK(brute_force_optimal_minimax(L, M).optimal_value == formula);
      CHECK(optimal_minimax_bound(L, M) == formula);
    }
  }
}

TEST_CASE("minimax_distance agrees with the direct scan on random placements") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const int L = rng.uniform_int(1, 40);
    const int M = rng.uniform_int(1, L);
    std::vector<std::int64_t> placed;
    for (int i = 0; i < M; ++i) placed.push_back(rng.uniform_int(1, L));
    std::sort(placed.begin(), placed.end());
    std::vector<std::int64_t> ctx;
    for (std::int64_t c = 1; c <= L; ++c) ctx.push_back(c);
    CAPTURE(L);
    CAPTURE(M);
    CHECK(minimax_distance(ctx, placed) == direct_minimax(L, placed));
  }
}

TEST_CASE("reference instance: three slots over ten positions") {
  const OracleResult res = brute_force_optimal_minimax(10, 3);
  CHECK(res.optimal_value == 2);
  CHECK(res.witness == std::vector<std::int64_t>{1, 3, 8});
}

TEST_CASE("oracle guards") {
  CHECK_THROWS_AS(brute_force_optimal_minimax(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(brute_force_optimal_minimax(4, 0), std::invalid_argument);
  CHECK_THROWS_AS(brute_force_optimal_minimax(4, 5), std::invalid_argument);
  CHECK_THROWS_AS(brute_force_optimal_minimax(65, 1), std::invalid_argument);
  CHECK_NOTHROW(brute_force_optimal_minimax(64, 1));
}
