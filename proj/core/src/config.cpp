#include "streamrec/config.hpp"

#include <fstream>

#include "streamrec/error.hpp"

namespace streamrec {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key = value, got '" + text + "'");
  std::string key = trim(text.substr(0, eq));
  std::string value = trim(text.substr(eq + 1));
  if (key.empty()) throw ConfigError("empty key in '" + text + "'");
  return {key, value};
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
  KeyValueConfig cfg;
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    try {
      auto [key, value] = split_assignment(line);
      cfg.values_[section.empty() ? key : section + "." + key] = value;
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in);
}

void KeyValueConfig::set_assignment(const std::string& assignment) {
  auto [key, value] = split_assignment(assignment);
  values_[key] = value;
}

const std::string* KeyValueConfig::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

void KeyValueConfig::write(std::ostream& out) const {
  std::string current;
  bool first = true;
  // Top-level keys first, then one block per section.
  for (const auto& [key, value] : values_) {
    if (key.find('.') == std::string::npos) out << key << " = " << value << '\n';
  }
  for (const auto& [key, value] : values_) {
    const auto dot = key.rfind('.');
    if (dot == std::string::npos) continue;
    const std::string section = key.substr(0, dot);
    if (first || section != current) {
      out << '\n' << '[' << section << "]\n";
      current = section;
      first = false;
    }
    out << key.substr(dot + 1) << " = " << value << '\n';
  }
}

}  // namespace streamrec
