#include "poslayout/serialize.hpp"

#include <cstdio>
#include <stdexcept>

#include <json.hpp>

namespace poslayout {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kConfigKeys[] = {
    "chunk_size",   "memory_count", "context_len", "total_len", "question_len",
    "answer_len",   "framework",    "scheme",      "task",
};

int require_count(const ordered_json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number_integer())
    throw std::invalid_argument(std::string("config key \"") + key +
                                "\" must be an integer");
  return v.get<int>();
}

std::string require_string(const ordered_json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_string())
    throw std::invalid_argument(std::string("config key \"") + key +
                                "\" must be a string");
  return v.get<std::string>();
}

}  // namespace

LayoutConfig layout_config_from_json(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");

  for (const auto& key : kConfigKeys)
    if (!doc.contains(key))
      throw std::invalid_argument(std::string("config key \"") + key + "\" missing");
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const auto& k : kConfigKeys) known |= key == k;
    if (!known)
      throw std::invalid_argument("unknown config key \"" + key + "\"");
  }

  LayoutConfig config;
  config.chunk_size = require_count(doc, "chunk_size");
  config.memory_count = require_count(doc, "memory_count");
  config.context_len = require_count(doc, "context_len");
  config.total_len = require_count(doc, "total_len");
  config.question_len = require_count(doc, "question_len");
  config.answer_len = require_count(doc, "answer_len");
  config.framework = framework_from_string(require_string(doc, "framework"));
  config.scheme = scheme_from_string(require_string(doc, "scheme"));
  config.task = task_from_string(require_string(doc, "task"));
  return config;
}

std::string to_json(const LayoutConfig& config) {
  ordered_json doc;
  doc["chunk_size"] = config.chunk_size;
  doc["memory_count"] = config.memory_count;
  doc["context_len"] = config.context_len;
  doc["total_len"] = config.total_len;
  doc["question_len"] = config.question_len;
  doc["answer_len"] = config.answer_len;
  doc["framework"] = to_string(config.framework);
  doc["scheme"] = to_string(config.scheme);
  doc["task"] = to_string(config.task);
  return doc.dump(2) + "\n";
}

std::string to_json(const PositionLayout& layout) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : layout.entries) {
    ordered_json obj;
    obj["role"] = to_string(e.role);
    if (e.chunk)
      obj["chunk"] = *e.chunk;
    else
      obj["chunk"] = nullptr;
    obj["index"] = e.index;
    obj["position_id"] = e.position_id;
    arr.push_back(std::move(obj));
  }
  return arr.dump(2) + "\n";
}

std::string to_csv(const PositionLayout& layout) {
  std::string out = "role,chunk,index,position_id\n";
  for (const auto& e : layout.entries) {
    out += to_string(e.role);
    out += ',';
    if (e.chunk) out += std::to_string(*e.chunk);
    out += ',';
    out += std::to_string(e.index);
    out += ',';
    out += std::to_string(e.position_id);
    out += '\n';
  }
  return out;
}

std::string to_json(const ValidationReport& report) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : report.checks) {
    ordered_json obj;
    obj["check"] = c.name;
    obj["passed"] = c.passed;
    obj["detail"] = c.detail;
    arr.push_back(std::move(obj));
  }
  return arr.dump(2) + "\n";
}

std::string to_json(const OracleResult& result) {
  ordered_json doc;
  doc["optimal"] = result.optimal_value;
  doc["witness"] = result.witness;
  return doc.dump(2) + "\n";
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace poslayout
