#include "poslayout/layout_config.hpp"

#include <stdexcept>

namespace poslayout {

const char* to_string(Framework f) {
  switch (f) {
    case Framework::Icae: return "icae";
    case Framework::X500: return "x500";
  }
  return "?";
}

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::Dpl: return "dpl";
    case Scheme::Epl: return "epl";
  }
  return "?";
}

const char* to_string(Task t) {
  switch (t) {
    case Task::Ae: return "ae";
    case Task::Lm: return "lm";
    case Task::Qa: return "qa";
  }
  return "?";
}

Framework framework_from_string(const std::string& s) {
  if (s == "icae") return Framework::Icae;
  if (s == "x500") return Framework::X500;
  throw std::invalid_argument("unknown framework \"" + s + "\" (want icae|x500)");
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "dpl") return Scheme::Dpl;
  if (s == "epl") return Scheme::Epl;
  throw std::invalid_argument("unknown scheme \"" + s + "\" (want dpl|epl)");
}

Task task_from_string(const std::string& t) {
  if (t == "ae") return Task::Ae;
  if (t == "lm") return Task::Lm;
  if (t == "qa") return Task::Qa;
  throw std::invalid_argument("unknown task \"" + t + "\" (want ae|lm|qa)");
}

int LayoutConfig::chunk_count() const {
  return static_cast<int>((context_len + chunk_size - 1) / chunk_size);
}

double LayoutConfig::compression_ratio() const {
  return static_cast<double>(chunk_size) / static_cast<double>(memory_count);
}

void LayoutConfig::validate() const {
  if (chunk_size < 1) throw std::invalid_argument("chunk_size must be positive");
  if (memory_count < 1) throw std::invalid_argument("memory_count must be positive");
  if (context_len < 1) throw std::invalid_argument("context_len must be positive");
  if (memory_count > chunk_size)
    throw std::invalid_argument("more memory tokens than context positions");
  if (question_len < 0 || answer_len < 0)
    throw std::invalid_argument("question_len/answer_len must be non-negative");
  if (total_len < 0) throw std::invalid_argument("total_len must be non-negative");
  if (task == Task::Lm && total_len <= context_len)
    throw std::invalid_argument("lm task needs total_len > context_len");
  if (task == Task::Qa) {
    if (question_len < 1) throw std::invalid_argument("qa task needs question_len >= 1");
    if (answer_len < 1) throw std::invalid_argument("qa task needs answer_len >= 1");
  }
}

LayoutConfig LayoutConfig::canonical() {
  LayoutConfig c;
  c.chunk_size = 510;
  c.memory_count = 102;
  c.context_len = 1020;
  c.total_len = 2040;
  c.question_len = 50;
  c.answer_len = 5;
  c.framework = Framework::Icae;
  c.scheme = Scheme::Dpl;
  c.task = Task::Ae;
  return c;
}

}  // namespace poslayout
