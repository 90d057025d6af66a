#include "poslayout/validate.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace poslayout {

bool ValidationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.passed; });
}

const CheckResult* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

// Memory/Carrier entries grouped by chunk, in layout order.
using ChunkIds = std::map<int, std::vector<std::int64_t>>;

ChunkIds chunked_memory_ids(const PositionLayout& layout) {
  ChunkIds ids;
  for (const auto& e : layout.entries)
    if (e.role == TokenRole::Memory || e.role == TokenRole::Carrier)
      ids[e.chunk.value_or(0)].push_back(e.position_id);
  return ids;
}

std::string join_ids(const std::vector<std::int64_t>& ids, std::size_t limit = 6) {
  std::ostringstream out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) {
    if (i) out << ", ";
    out << ids[i];
  }
  if (ids.size() > limit) out << ", ...";
  return out.str();
}

void check_non_negative(const PositionLayout& layout, ValidationReport& report) {
  std::vector<std::int64_t> bad;
  for (const auto& e : layout.entries)
    if (e.position_id < 0) bad.push_back(e.position_id);
  report.checks.push_back({"non-negative position ids", bad.empty(),
                           bad.empty() ? "" : "negative ids: " + join_ids(bad)});
}

void check_segment_indices(const PositionLayout& layout, ValidationReport& report) {
  // Logical indices must ascend by exactly one inside every (role, chunk)
  // segment; the starting value is the segment's own business.
  std::map<std::pair<TokenRole, int>, std::int64_t> last;
  std::vector<std::string> bad;
  for (const auto& e : layout.entries) {
    const auto key = std::make_pair(e.role, e.chunk.value_or(0));
    const auto it = last.find(key);
    if (it != last.end() && e.index != it->second + 1)
      bad.push_back(std::string(to_string(e.role)) + " index " +
                    std::to_string(e.index) + " after " + std::to_string(it->second));
    last[key] = e.index;
  }
  std::string detail;
  for (std::size_t i = 0; i < bad.size() && i < 4; ++i)
    detail += (i ? "; " : "") + bad[i];
  report.checks.push_back({"segment indices consecutive", bad.empty(), detail});
}

void check_context_consecutive(const PositionLayout& layout, ValidationReport& report) {
  // Non-memory segments (context, question, answer, vision text) must carry
  // consecutive position IDs in physical order.
  static constexpr TokenRole kSequential[] = {TokenRole::Context, TokenRole::Question,
                                              TokenRole::Answer, TokenRole::Vision};
  std::vector<std::string> bad;
  for (const TokenRole role : kSequential) {
    std::vector<std::int64_t> ids = layout.ids_for(role);
    for (std::size_t i = 1; i < ids.size(); ++i)
      if (ids[i] != ids[i - 1] + 1) {
        bad.push_back(std::string(to_string(role)) + " id " + std::to_string(ids[i]) +
                      " after " + std::to_string(ids[i - 1]));
        break;
      }
  }
  std::string detail;
  for (std::size_t i = 0; i < bad.size(); ++i) detail += (i ? "; " : "") + bad[i];
  report.checks.push_back({"context ids consecutive", bad.empty(), detail});
}

void check_memory_in_range(const PositionLayout& layout, const LayoutConfig& config,
                           ValidationReport& report, const ChunkIds& mem) {
  std::vector<std::string> bad;
  for (const auto& [chunk, ids] : mem) {
    if (chunk < 1 || chunk > config.chunk_count()) {
      bad.push_back("chunk index " + std::to_string(chunk) + " out of range");
      continue;
    }
    const std::int64_t start = static_cast<std::int64_t>(chunk - 1) * config.chunk_size;
    const std::int64_t len =
        std::min<std::int64_t>(config.chunk_size, config.context_len - start);
    const std::int64_t lo = start + 1;
    const std::int64_t hi = start + len;
    for (const std::int64_t id : ids)
      if (id < lo || id > hi)
        bad.push_back("memory id " + std::to_string(id) + " outside chunk " +
                      std::to_string(chunk) + " range [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
  std::string detail;
  for (std::size_t i = 0; i < bad.size() && i < 4; ++i) detail += (i ? "; " : "") + bad[i];
  report.checks.push_back({"memory in context range", bad.empty(), detail});
}

void check_no_duplicates(ValidationReport& report, const ChunkIds& mem) {
  // Repeats across chunks are legitimate (Dpl carriers repeat by design);
  // repeats inside one chunk are not.
  std::vector<std::string> bad;
  for (const auto& [chunk, ids] : mem) {
    std::set<std::int64_t> seen;
    for (const std::int64_t id : ids)
      if (!seen.insert(id).second)
        bad.push_back("id " + std::to_string(id) + " repeats in chunk " +
                      std::to_string(chunk));
  }
  std::string detail;
  for (std::size_t i = 0; i < bad.size() && i < 4; ++i) detail += (i ? "; " : "") + bad[i];
  report.checks.push_back({"no duplicate memory ids", bad.empty(), detail});
}

void check_carrier_identity(const PositionLayout& layout, const LayoutConfig& config,
                            ValidationReport& report) {
  // Epl decoders must replay the encoder's memory IDs chunk by chunk.
  std::vector<std::string> bad;
  for (int i = 1; i <= config.chunk_count(); ++i) {
    const auto got = layout.ids_for(TokenRole::Carrier, i);
    std::vector<std::int64_t> want;
    try {
      const std::int64_t start = static_cast<std::int64_t>(i - 1) * config.chunk_size;
      const std::int64_t len =
          std::min<std::int64_t>(config.chunk_size, config.context_len - start);
      want = uniform_memory_positions(start + 1, start + len, config.memory_count);
    } catch (const std::exception& e) {
      bad.push_back("chunk " + std::to_string(i) + ": " + e.what());
      continue;
    }
    if (got != want)
      bad.push_back("chunk " + std::to_string(i) + " carriers [" + join_ids(got) +
                    "] != encoder memory [" + join_ids(want) + "]");
  }
  std::string detail;
  for (std::size_t i = 0; i < bad.size() && i < 2; ++i) detail += (i ? "; " : "") + bad[i];
  report.checks.push_back({"carrier identity", bad.empty(), detail});
}

void check_causal_ordering(const PositionLayout& layout, ValidationReport& report,
                           const ChunkIds& mem) {
  std::vector<std::string> bad;

  const LayoutEntry* prompt = nullptr;
  for (const auto& e : layout.entries)
    if (e.role == TokenRole::Ae || e.role == TokenRole::Lm) {
      prompt = &e;
      break;
    }

  std::vector<std::int64_t> subsequent;
  for (const auto& e : layout.entries)
    if (e.role == TokenRole::Context || e.role == TokenRole::Question ||
        e.role == TokenRole::Answer)
      subsequent.push_back(e.position_id);

  if (prompt == nullptr) {
    bad.push_back("prompt token missing");
  } else {
    for (const auto& [chunk, ids] : mem)
      for (const std::int64_t id : ids)
        if (id >= prompt->position_id) {
          bad.push_back("carrier id " + std::to_string(id) + " >= prompt id " +
                        std::to_string(prompt->position_id));
          break;
        }
    for (const std::int64_t id : subsequent)
      if (id <= prompt->position_id) {
        bad.push_back("subsequent id " + std::to_string(id) + " <= prompt id " +
                      std::to_string(prompt->position_id));
        break;
      }
  }

  // Later chunks must sit strictly above earlier ones; adjacent pairs are
  // enough since the condition is transitive.
  for (auto it = mem.begin(); it != mem.end(); ++it) {
    const auto next = std::next(it);
    if (next == mem.end()) break;
    if (it->second.empty() || next->second.empty()) continue;
    const std::int64_t max_a =
        *std::max_element(it->second.begin(), it->second.end());
    const std::int64_t min_b =
        *std::min_element(next->second.begin(), next->second.end());
    if (max_a >= min_b)
      bad.push_back("chunk " + std::to_string(it->first) + " max carrier " +
                    std::to_string(max_a) + " >= chunk " +
                    std::to_string(next->first) + " min carrier " +
                    std::to_string(min_b));
  }

  std::string detail;
  for (std::size_t i = 0; i < bad.size() && i < 4; ++i) detail += (i ? "; " : "") + bad[i];
  report.checks.push_back({"causal id ordering", bad.empty(), detail});
}

}  // namespace

ValidationReport validate_layout(const PositionLayout& layout,
                                 const LayoutConfig& config) {
  ValidationReport report;

  const ChunkIds mem = chunked_memory_ids(layout);
  const bool has_memory = !mem.empty();
  const bool has_carrier =
      std::any_of(layout.entries.begin(), layout.entries.end(),
                  [](const LayoutEntry& e) { return e.role == TokenRole::Carrier; });

  check_non_negative(layout, report);
  check_segment_indices(layout, report);
  check_context_consecutive(layout, report);

  if (has_memory && config.scheme == Scheme::Epl && config.chunk_size > 0 &&
      config.context_len > 0)
    check_memory_in_range(layout, config, report, mem);
  if (has_memory) check_no_duplicates(report, mem);
  if (has_carrier && config.scheme == Scheme::Epl && config.chunk_size > 0 &&
      config.context_len > 0 && config.memory_count > 0)
    check_carrier_identity(layout, config, report);
  if (has_carrier && (config.task == Task::Lm || config.task == Task::Qa))
    check_causal_ordering(layout, report, mem);

  return report;
}

}  // namespace poslayout
