#pragma once

#include <string>

#include "poslayout/layout.hpp"
#include "poslayout/oracle.hpp"
#include "poslayout/validate.hpp"

namespace poslayout {

// Strict LayoutConfig JSON codec.  The document must be an object with
// exactly the keys {chunk_size, memory_count, context_len, total_len,
// question_len, answer_len, framework, scheme, task}; enums are lowercase
// strings ("icae"/"x500", "dpl"/"epl", "ae"/"lm"/"qa").  Unknown or missing
// keys throw std::invalid_argument.
LayoutConfig layout_config_from_json(const std::string& text);
std::string to_json(const LayoutConfig& config);

// Layout as a JSON array of {"role", "chunk", "index", "position_id"}
// objects ("chunk" is null outside memory/carrier entries), and as CSV with
// the same columns (empty chunk field, comma delimiter, LF line endings).
std::string to_json(const PositionLayout& layout);
std::string to_csv(const PositionLayout& layout);

std::string to_json(const ValidationReport& report);
std::string to_json(const OracleResult& result);

// Doubles rendered with 17 significant digits — enough to round-trip and
// byte-stable across runs.  All CSV output goes through this.
std::string format_double(double v);

}  // namespace poslayout
