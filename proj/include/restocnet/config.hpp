#ifndef RESTOCNET_CONFIG_HPP
#define RESTOCNET_CONFIG_HPP

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "restocnet/error.hpp"

namespace restocnet {

/// Structured text configuration: `[section]` headers followed by
/// `key = value` pairs; `#` starts a comment; keys may be dotted.
/// Insertion order is preserved so serialize/parse round-trips.
class Config {
 public:
  struct Entry {
    std::string key, value;
  };
  struct Section {
    std::string name;
    std::vector<Entry> entries;
  };

  static Config parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    Section* current = nullptr;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        require(line.back() == ']' && line.size() > 2, ErrorClass::Config,
                "config line " + std::to_string(lineno) + ": malformed section header");
        cfg.sections_.push_back({trim(line.substr(1, line.size() - 2)), {}});
        current = &cfg.sections_.back();
        continue;
      }
      const std::size_t eq = line.find('=');
      require(eq != std::string::npos, ErrorClass::Config,
              "config line " + std::to_string(lineno) + ": expected key = value");
      require(current != nullptr, ErrorClass::Config,
              "config line " + std::to_string(lineno) + ": key outside any section");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      require(!key.empty(), ErrorClass::Config,
              "config line " + std::to_string(lineno) + ": empty key");
      current->entries.push_back({key, value});
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorClass::Io, "cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  std::string serialize() const {
    std::ostringstream out;
    for (std::size_t s = 0; s < sections_.size(); ++s) {
      if (s) out << "\n";
      out << "[" << sections_[s].name << "]\n";
      for (const Entry& e : sections_[s].entries)
        out << e.key << " = " << e.value << "\n";
    }
    return out.str();
  }

  bool has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
  }
  bool has_section(const std::string& section) const {
    return section_ptr(section) != nullptr;
  }

  std::string get_string(const std::string& section, const std::string& key) const {
    const std::string* v = find(section, key);
    require(v != nullptr, ErrorClass::Config,
            "missing config key [" + section + "] " + key);
    return *v;
  }
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const std::string* v = find(section, key);
    return v ? *v : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    return to_double(get_string(section, key), section, key);
  }
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const {
    const std::string* v = find(section, key);
    return v ? to_double(*v, section, key) : fallback;
  }

  long long get_int(const std::string& section, const std::string& key) const {
    return to_int(get_string(section, key), section, key);
  }
  long long get_int(const std::string& section, const std::string& key,
                    long long fallback) const {
    const std::string* v = find(section, key);
    return v ? to_int(*v, section, key) : fallback;
  }

  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const {
    const std::string* v = find(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    fail(ErrorClass::Config, "bad boolean for [" + section + "] " + key + ": " + *v);
  }

  void set(const std::string& section, const std::string& key,
           const std::string& value) {
    Section* sec = section_ptr(section);
    if (!sec) {
      sections_.push_back({section, {}});
      sec = &sections_.back();
    }
    for (Entry& e : sec->entries)
      if (e.key == key) {
        e.value = value;
        return;
      }
    sec->entries.push_back({key, value});
  }

  const std::vector<Section>& sections() const { return sections_; }

  bool operator==(const Config& other) const {
    if (sections_.size() != other.sections_.size()) return false;
    for (std::size_t s = 0; s < sections_.size(); ++s) {
      if (sections_[s].name != other.sections_[s].name ||
          sections_[s].entries.size() != other.sections_[s].entries.size())
        return false;
      for (std::size_t e = 0; e < sections_[s].entries.size(); ++e)
        if (sections_[s].entries[e].key != other.sections_[s].entries[e].key ||
            sections_[s].entries[e].value != other.sections_[s].entries[e].value)
          return false;
    }
    return true;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  static double to_double(const std::string& v, const std::string& section,
                          const std::string& key) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    require(end != v.c_str() && *end == '\0', ErrorClass::Config,
            "bad number for [" + section + "] " + key + ": " + v);
    return x;
  }
  static long long to_int(const std::string& v, const std::string& section,
                          const std::string& key) {
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    require(end != v.c_str() && *end == '\0', ErrorClass::Config,
            "bad integer for [" + section + "] " + key + ": " + v);
    return x;
  }

  const Section* section_ptr(const std::string& name) const {
    for (const Section& s : sections_)
      if (s.name == name) return &s;
    return nullptr;
  }
  Section* section_ptr(const std::string& name) {
    for (Section& s : sections_)
      if (s.name == name) return &s;
    return nullptr;
  }
  const std::string* find(const std::string& section, const std::string& key) const {
    const Section* sec = section_ptr(section);
    if (!sec) return nullptr;
    for (const Entry& e : sec->entries)
      if (e.key == key) return &e.value;
    return nullptr;
  }

  std::vector<Section> sections_;
};

/// Comma-separated list helper ("a, b, c" -> {"a","b","c"}).
inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace restocnet

#endif
