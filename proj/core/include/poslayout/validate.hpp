#pragma once

#include <string>
#include <vector>

#include "poslayout/layout.hpp"

namespace poslayout {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // empty on pass, offending IDs / reason on failure
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  bool all_passed() const;
  const CheckResult* find(const std::string& name) const;
};

// Structural audit of a layout against its config.  Runs every check that
// applies to the layout's shape (encoder, decoder, or vision sequence) and
// returns a flat list of results; it never throws, even on malformed input.
//
// Checks, when applicable:
//   "non-negative position ids"   every ID >= 0
//   "segment indices consecutive" logical indices ascend by 1 per segment
//   "context ids consecutive"     non-memory IDs ascend by 1 per segment
//   "memory in context range"     Epl memory/carrier IDs inside their chunk
//   "no duplicate memory ids"     no repeats within one chunk's memory IDs
//   "carrier identity"            Epl decoder carriers equal encoder memory
//   "causal id ordering"          Lm/Qa decoders: carriers < prompt < targets
//                                 and carrier IDs ascend chunk to chunk
ValidationReport validate_layout(const PositionLayout& layout,
                                 const LayoutConfig& config);

}  // namespace poslayout
