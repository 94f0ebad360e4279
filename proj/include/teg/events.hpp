#pragma once

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace teg {

using Json = nlohmann::ordered_json;

/// Append-only run log. One JSON object per event; the serialized lines
/// are the byte-authoritative events.jsonl. Every run metric is
/// recomputable from this log alone.
class EventLog {
 public:
  void emit(const Json& event) {
    lines_.push_back(event.dump());
    parsed_.push_back(event);
  }

  const std::vector<std::string>& lines() const { return lines_; }
  const std::vector<Json>& events() const { return parsed_; }

  void write_jsonl(std::ostream& os) const;
  void write_jsonl_file(const std::string& path) const;

  static std::vector<Json> read_jsonl_file(const std::string& path);

 private:
  std::vector<std::string> lines_;
  std::vector<Json> parsed_;
};

}  // namespace teg
