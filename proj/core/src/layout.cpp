#include "poslayout/layout.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace poslayout {

const char* to_string(TokenRole r) {
  switch (r) {
    case TokenRole::Context: return "context";
    case TokenRole::Memory: return "memory";
    case TokenRole::Carrier: return "carrier";
    case TokenRole::Ae: return "ae";
    case TokenRole::Lm: return "lm";
    case TokenRole::Question: return "question";
    case TokenRole::Answer: return "answer";
    case TokenRole::Vision: return "vision";
    case TokenRole::Voco: return "voco";
  }
  return "?";
}

std::vector<std::int64_t> PositionLayout::ids_for(TokenRole role) const {
  std::vector<std::int64_t> ids;
  for (const auto& e : entries)
    if (e.role == role) ids.push_back(e.position_id);
  return ids;
}

std::vector<std::int64_t> PositionLayout::ids_for(TokenRole role, int chunk) const {
  std::vector<std::int64_t> ids;
  for (const auto& e : entries)
    if (e.role == role && e.chunk && *e.chunk == chunk) ids.push_back(e.position_id);
  return ids;
}

Rational Rational::of(std::int64_t num, std::int64_t den) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational{num, den};
}

Rational Rational::operator+(const Rational& o) const {
  return Rational::of(num * o.den + o.num * den, den * o.den);
}

Rational Rational::operator-(const Rational& o) const {
  return Rational::of(num * o.den - o.num * den, den * o.den);
}

Rational Rational::operator*(std::int64_t k) const { return Rational::of(num * k, den); }

UniformSpec make_uniform_spec(std::int64_t first_id, std::int64_t last_id,
                              int memory_count) {
  if (last_id < first_id)
    throw std::invalid_argument("empty context range (last_id < first_id)");
  if (memory_count < 1) throw std::invalid_argument("memory_count must be positive");
  const std::int64_t span = last_id - first_id + 1;
  if (memory_count > span)
    throw std::invalid_argument("more memory tokens than context positions");

  UniformSpec spec;
  spec.first_id = first_id;
  spec.last_id = last_id;
  spec.memory_count = memory_count;
  spec.ratio = Rational::of(span, memory_count);
  const Rational halfgap = spec.ratio - Rational::of(1);  // r - 1
  spec.offset = Rational::of(halfgap.num, halfgap.den * 2);
  spec.start = Rational::of(first_id) + spec.offset;
  return spec;
}

std::int64_t round_half_even(const Rational& v) {
  // floor division keeps the remainder in [0, den) for negative values too.
  std::int64_t q = v.num / v.den;
  std::int64_t rem = v.num % v.den;
  if (rem < 0) {
    q -= 1;
    rem += v.den;
  }
  const std::int64_t twice = 2 * rem;
  if (twice < v.den) return q;
  if (twice > v.den) return q + 1;
  return (q % 2 == 0) ? q : q + 1;  // exact tie: pick the even neighbour
}

std::vector<std::pair<std::int64_t, std::int64_t>> partition_context(
    std::int64_t context_len, std::int64_t chunk_size) {
  if (context_len < 1) throw std::invalid_argument("context_len must be positive");
  if (chunk_size < 1) throw std::invalid_argument("chunk_size must be positive");
  std::vector<std::pair<std::int64_t, std::int64_t>> ranges;
  for (std::int64_t start = 0; start < context_len; start += chunk_size)
    ranges.emplace_back(start, std::min(start + chunk_size, context_len));
  return ranges;
}

std::vector<std::int64_t> uniform_memory_positions(std::int64_t first_id,
                                                   std::int64_t last_id,
                                                   int memory_count) {
  const UniformSpec spec = make_uniform_spec(first_id, last_id, memory_count);
  std::vector<std::int64_t> ids(static_cast<std::size_t>(memory_count));
  for (int j = 0; j < memory_count; ++j)
    ids[static_cast<std::size_t>(j)] = round_half_even(spec.start + spec.ratio * j);
  return ids;
}

std::int64_t minimax_distance(std::span<const std::int64_t> context_ids,
                              std::span<const std::int64_t> memory_ids) {
  if (context_ids.empty()) throw std::invalid_argument("context_ids is empty");
  if (memory_ids.empty()) throw std::invalid_argument("memory_ids is empty");
  std::int64_t worst = 0;
  for (const std::int64_t v : context_ids) {
    std::int64_t nearest = std::numeric_limits<std::int64_t>::max();
    for (const std::int64_t u : memory_ids)
      nearest = std::min(nearest, v >= u ? v - u : u - v);
    worst = std::max(worst, nearest);
  }
  return worst;
}

namespace {

// Context range of a 1-based chunk plus its actual length.
struct ChunkRange {
  std::int64_t start = 0;  // 0-based offset of the first token
  std::int64_t len = 0;
};

ChunkRange chunk_range(const LayoutConfig& config, int chunk_index) {
  const auto ranges = partition_context(config.context_len, config.chunk_size);
  if (chunk_index < 1 || chunk_index > static_cast<int>(ranges.size()))
    throw std::invalid_argument("chunk_index out of range (have " +
                                std::to_string(ranges.size()) + " chunks)");
  const auto& [s, e] = ranges[static_cast<std::size_t>(chunk_index - 1)];
  return ChunkRange{s, e - s};
}

// Epl memory IDs of one chunk: uniform placement over the chunk's global
// 1-based context range, using the chunk's actual length.
std::vector<std::int64_t> epl_memory_ids(const LayoutConfig& config, int chunk_index) {
  const ChunkRange r = chunk_range(config, chunk_index);
  return uniform_memory_positions(r.start + 1, r.start + r.len, config.memory_count);
}

}  // namespace

PositionLayout encoder_layout(const LayoutConfig& config, int chunk_index) {
  config.validate();
  const ChunkRange r = chunk_range(config, chunk_index);

  PositionLayout layout;
  layout.entries.reserve(static_cast<std::size_t>(r.len + config.memory_count));

  if (config.scheme == Scheme::Dpl) {
    for (std::int64_t t = 0; t < r.len; ++t)
      layout.entries.push_back({TokenRole::Context, std::nullopt, r.start + t, t});
    for (int j = 0; j < config.memory_count; ++j)
      layout.entries.push_back({TokenRole::Memory, chunk_index, j, r.len + j});
  } else {
    for (std::int64_t t = 0; t < r.len; ++t)
      layout.entries.push_back(
          {TokenRole::Context, std::nullopt, r.start + t, r.start + 1 + t});
    const auto mem = epl_memory_ids(config, chunk_index);
    for (int j = 0; j < config.memory_count; ++j)
      layout.entries.push_back(
          {TokenRole::Memory, chunk_index, j, mem[static_cast<std::size_t>(j)]});
  }
  return layout;
}

PositionLayout decoder_layout(const LayoutConfig& config) {
  config.validate();
  const int k = config.chunk_count();
  const std::int64_t m = config.memory_count;

  PositionLayout layout;

  // Carrier IDs per chunk.  Icae/Dpl re-embeds carriers as fresh inputs and
  // numbers them consecutively; X500/Dpl keeps the encoder-side memory IDs
  // baked into the KV entries; Epl reuses the encoder memory IDs either way.
  for (int i = 1; i <= k; ++i) {
    if (config.scheme == Scheme::Epl) {
      const auto mem = epl_memory_ids(config, i);
      for (int j = 0; j < config.memory_count; ++j)
        layout.entries.push_back(
            {TokenRole::Carrier, i, j, mem[static_cast<std::size_t>(j)]});
    } else if (config.framework == Framework::Icae) {
      for (std::int64_t j = 0; j < m; ++j)
        layout.entries.push_back({TokenRole::Carrier, i, j, (i - 1) * m + j});
    } else {
      const ChunkRange r = chunk_range(config, i);
      for (std::int64_t j = 0; j < m; ++j)
        layout.entries.push_back({TokenRole::Carrier, i, j, r.len + j});
    }
  }

  const std::int64_t prompt_id =
      config.scheme == Scheme::Dpl ? k * m
      : config.task == Task::Ae    ? 0
                                   : config.context_len;
  layout.entries.push_back(
      {config.task == Task::Ae ? TokenRole::Ae : TokenRole::Lm, std::nullopt, 0,
       prompt_id});

  // Target tokens always continue consecutively after the prompt.
  std::int64_t id = prompt_id + 1;
  switch (config.task) {
    case Task::Ae:
      for (int t = 0; t < config.context_len; ++t)
        layout.entries.push_back({TokenRole::Context, std::nullopt, t, id++});
      break;
    case Task::Lm:
      for (int t = config.context_len; t < config.total_len; ++t)
        layout.entries.push_back({TokenRole::Context, std::nullopt, t, id++});
      break;
    case Task::Qa:
      for (int t = 0; t < config.question_len; ++t)
        layout.entries.push_back({TokenRole::Question, std::nullopt, t, id++});
      for (int t = 0; t < config.answer_len; ++t)
        layout.entries.push_back({TokenRole::Answer, std::nullopt, t, id++});
      break;
  }
  return layout;
}

PositionLayout voco_layout(int n_vision, int n_voco, int n_text, Scheme scheme) {
  if (n_vision < 1 || n_voco < 1 || n_text < 1)
    throw std::invalid_argument("vision/voco/text counts must be positive");
  if (n_voco > n_vision)
    throw std::invalid_argument("more voco tokens than vision positions");

  PositionLayout layout;
  layout.entries.reserve(static_cast<std::size_t>(n_vision + n_voco + n_text));

  if (scheme == Scheme::Dpl) {
    std::int64_t id = 0;
    for (int t = 0; t < n_vision; ++t)
      layout.entries.push_back({TokenRole::Vision, std::nullopt, t, id++});
    for (int t = 0; t < n_voco; ++t)
      layout.entries.push_back({TokenRole::Voco, std::nullopt, t, id++});
    for (int t = 0; t < n_text; ++t)
      layout.entries.push_back({TokenRole::Context, std::nullopt, t, id++});
  } else {
    for (int t = 0; t < n_vision; ++t)
      layout.entries.push_back({TokenRole::Vision, std::nullopt, t, 1 + t});
    const auto voco = uniform_memory_positions(1, n_vision, n_voco);
    for (int t = 0; t < n_voco; ++t)
      layout.entries.push_back(
          {TokenRole::Voco, std::nullopt, t, voco[static_cast<std::size_t>(t)]});
    for (int t = 0; t < n_text; ++t)
      layout.entries.push_back({TokenRole::Context, std::nullopt, t, n_vision + 1 + t});
  }
  return layout;
}

}  // namespace poslayout
