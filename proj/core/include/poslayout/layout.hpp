#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "poslayout/layout_config.hpp"

namespace poslayout {

// What a slot in a laid-out sequence holds.  Memory/Carrier entries carry a
// 1-based chunk index; Ae/Lm are the single prompt tokens of the decoder.
enum class TokenRole {
  Context,
  Memory,
  Carrier,
  Ae,
  Lm,
  Question,
  Answer,
  Vision,
  Voco,
};

const char* to_string(TokenRole r);

struct LayoutEntry {
  TokenRole role = TokenRole::Context;
  std::optional<int> chunk;      // 1-based, only for Memory/Carrier
  std::int64_t index = 0;        // logical index within the role segment
  std::int64_t position_id = 0;  // the assigned rotary/absolute position ID
};

// A physical token sequence annotated with position IDs, in physical order.
struct PositionLayout {
  std::vector<LayoutEntry> entries;

  std::vector<std::int64_t> ids_for(TokenRole role) const;
  std::vector<std::int64_t> ids_for(TokenRole role, int chunk) const;
};

// Exact fraction (den > 0, reduced).  Position arithmetic stays in rationals
// so spacing identities hold exactly before the final integer rounding.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational of(std::int64_t num, std::int64_t den = 1);
  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(std::int64_t k) const;
  bool operator==(const Rational& o) const = default;
};

// Unrounded description of a uniform memory placement over [first_id, last_id]:
// ratio r = span / memory_count, half-gap offset o = (r - 1) / 2, and the
// first unrounded value b = first_id + o.  The j-th unrounded position is
// b + j * r, and b + (count - 1) * r == last_id - o exactly.
struct UniformSpec {
  std::int64_t first_id = 0;
  std::int64_t last_id = 0;
  int memory_count = 0;
  Rational ratio;
  Rational offset;
  Rational start;
};

UniformSpec make_uniform_spec(std::int64_t first_id, std::int64_t last_id,
                              int memory_count);

// Nearest integer with ties to even — the single rounding rule used for all
// position arithmetic.  Matches tensor-library round() semantics.
std::int64_t round_half_even(const Rational& v);

// Splits [0, context_len) into chunk_size-sized half-open ranges; the final
// range may be shorter.  Throws on non-positive arguments.
std::vector<std::pair<std::int64_t, std::int64_t>> partition_context(
    std::int64_t context_len, std::int64_t chunk_size);

// Uniform placement of memory_count position IDs over [first_id, last_id]:
// round(linspace(first_id + o, last_id - o, memory_count)) with ties to even.
// Throws when the range is empty or memory_count exceeds the span.
std::vector<std::int64_t> uniform_memory_positions(std::int64_t first_id,
                                                   std::int64_t last_id,
                                                   int memory_count);

// max over context IDs of the distance to the nearest memory ID.
// Throws when either sequence is empty.
std::int64_t minimax_distance(std::span<const std::int64_t> context_ids,
                              std::span<const std::int64_t> memory_ids);

// Encoder-side layout of one chunk (1-based chunk_index): the chunk's context
// tokens followed by its memory tokens.  Dpl restarts context IDs at 0 per
// chunk and appends memory IDs right after the chunk; Epl uses the global
// 1-based context IDs and uniform memory positions inside the chunk's range.
PositionLayout encoder_layout(const LayoutConfig& config, int chunk_index);

// Decoder-side layout for the configured framework/scheme/task: all memory
// carriers, the task prompt token, then the teacher-forced target tokens.
PositionLayout decoder_layout(const LayoutConfig& config);

// Layout for a vision-compression sequence [vision; voco; text].  Dpl numbers
// the whole sequence consecutively from 0; Epl gives vision tokens IDs
// 1..n_vision, voco tokens uniform positions over that range, and text tokens
// the IDs continuing after the vision range.
PositionLayout voco_layout(int n_vision, int n_voco, int n_text, Scheme scheme);

}  // namespace poslayout
