#include "teg/events.hpp"

#include <fstream>
#include <ostream>
#include <stdexcept>

namespace teg {

void EventLog::write_jsonl(std::ostream& os) const {
  for (const auto& line : lines_) os << line << '\n';
}

void EventLog::write_jsonl_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_jsonl(out);
}

std::vector<Json> EventLog::read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<Json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(Json::parse(line));
  }
  return out;
}

}  // namespace teg
