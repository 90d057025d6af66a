#pragma once

#include <string>

namespace poslayout {

// Compression framework whose carrier mechanics the layout targets.
// Icae feeds compressed memory back as decoder input embeddings;
// X500 feeds it back as prefilled per-layer KV entries.
enum class Framework { Icae, X500 };

// Position-ID scheme: Dpl restarts IDs per chunk (framework defaults),
// Epl assigns globally increasing IDs with uniformly spread memory IDs.
enum class Scheme { Dpl, Epl };

// Decoding task the layout is built for.
enum class Task { Ae, Lm, Qa };

const char* to_string(Framework f);
const char* to_string(Scheme s);
const char* to_string(Task t);

Framework framework_from_string(const std::string& s);
Scheme scheme_from_string(const std::string& s);
Task task_from_string(const std::string& t);

// Full description of one compression setup.  Lengths are token counts:
// chunk_size (L) and memory_count (M) shape the encoder; context_len (p),
// total_len (X), question_len (Q) and answer_len (A) shape the decoder side.
struct LayoutConfig {
  int chunk_size = 0;
  int memory_count = 0;
  int context_len = 0;
  int total_len = 0;
  int question_len = 0;
  int answer_len = 0;
  Framework framework = Framework::Icae;
  Scheme scheme = Scheme::Dpl;
  Task task = Task::Ae;

  // Number of encoder chunks: ceil(context_len / chunk_size).
  int chunk_count() const;

  // Compression ratio r = chunk_size / memory_count.
  double compression_ratio() const;

  // Throws std::invalid_argument when any field combination is unusable
  // (non-positive lengths, memory_count > chunk_size, LM without room for
  // a completion, QA without question or answer tokens).
  void validate() const;

  // Reference configuration used throughout: two chunks of 510 tokens,
  // 102 memory tokens each (ratio 5), 1020-token context inside a
  // 2040-token window, 50-token questions with 5-token answers.
  static LayoutConfig canonical();
};

}  // namespace poslayout
