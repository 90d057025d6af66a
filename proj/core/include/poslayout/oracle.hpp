#pragma once

#include <cstdint>
#include <vector>

namespace poslayout {

struct OracleResult {
  std::int64_t optimal_value = 0;
  std::vector<std::int64_t> witness;  // one optimal placement, ascending
};

// Exact optimum of the minimax placement problem: put memory_count integer
// IDs inside [1, chunk_len] so that the largest distance from any context ID
// in {1..chunk_len} to its nearest memory ID is minimal.  Branch-and-bound
// over sorted placements; every pruned branch is provably no better than the
// incumbent, so the search is exhaustive in effect.  Guarded to
// chunk_len <= 64 — above that the instance is considered too large.
OracleResult brute_force_optimal_minimax(int chunk_len, int memory_count);

// Closed-form value the optimum is expected to take: floor(ceil(L/M) / 2).
// Kept separate so searches and formula can be compared in tests.
std::int64_t optimal_minimax_bound(int chunk_len, int memory_count);

}  // namespace poslayout
