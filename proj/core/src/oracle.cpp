#include "poslayout/oracle.hpp"

#include <algorithm>
#include <stdexcept>

namespace poslayout {

std::int64_t optimal_minimax_bound(int chunk_len, int memory_count) {
  const std::int64_t ceil_ratio =
      (chunk_len + memory_count - 1) / static_cast<std::int64_t>(memory_count);
  return ceil_ratio / 2;
}

namespace {

// Depth-first search over ascending placements u_1 < ... < u_M in [1, L].
// For a sorted placement the objective decomposes into edge and gap costs:
//   max(u_1 - 1, L - u_M, max_i floor((u_{i+1} - u_i) / 2))
// (tests cross-check this decomposition against the direct definition).
// The partial cost along a path only ever grows, so any branch reaching the
// incumbent is cut, and each level stops early once its gap cost alone is
// too big — gap cost is non-decreasing in u.
struct Search {
  int len = 0;
  int count = 0;
  std::int64_t best = 0;
  std::vector<std::int64_t> current;
  std::vector<std::int64_t> witness;

  void run(int depth, std::int64_t prev, std::int64_t cost_so_far) {
    if (cost_so_far >= best) return;
    if (depth == count) {
      const std::int64_t total = std::max(cost_so_far, len - prev);
      if (total < best) {
        best = total;
        witness = current;
      }
      return;
    }
    const std::int64_t remaining = count - depth;
    for (std::int64_t u = prev + 1; u <= len - remaining + 1; ++u) {
      const std::int64_t gap_cost = depth == 0 ? u - 1 : (u - prev) / 2;
      if (gap_cost >= best) break;
      current[static_cast<std::size_t>(depth)] = u;
      run(depth + 1, u, std::max(cost_so_far, gap_cost));
    }
  }
};

}  // namespace

OracleResult brute_force_optimal_minimax(int chunk_len, int memory_count) {
  if (chunk_len < 1) throw std::invalid_argument("chunk_len must be positive");
  if (memory_count < 1) throw std::invalid_argument("memory_count must be positive");
  if (memory_count > chunk_len)
    throw std::invalid_argument("more memory tokens than context positions");
  if (chunk_len > 64)
    throw std::invalid_argument("oracle instance too large (chunk_len > 64)");

  Search s;
  s.len = chunk_len;
  s.count = memory_count;
  s.current.assign(static_cast<std::size_t>(memory_count), 0);

  // Left-packed placement 1..M (cost L - M) seeds the incumbent; the search
  // then only visits placements that improve on it.
  s.witness.resize(static_cast<std::size_t>(memory_count));
  for (int j = 0; j < memory_count; ++j) s.witness[static_cast<std::size_t>(j)] = j + 1;
  s.best = chunk_len - memory_count;

  s.run(0, 0, 0);

  return OracleResult{s.best, std::move(s.witness)};
}

}  // namespace poslayout
