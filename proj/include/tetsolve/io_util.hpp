#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tetsolve/errors.hpp"

namespace tetsolve {

/// Write a file atomically: stream into a temp file in the same directory,
/// then rename over the target. No partial output is left behind on error.
inline void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  static std::atomic<uint64_t> counter{0};
  const fs::path tmp =
      target.parent_path() / (target.filename().string() + ".tmp" +
                              std::to_string(::getpid()) + "." +
                              std::to_string(counter.fetch_add(1)));
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot open for writing: " + tmp.string());
    try {
      fn(os);
      os.flush();
      if (!os) throw Error("write failed: " + tmp.string());
    } catch (...) {
      os.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw;
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot rename " + tmp.string() + " to " + path);
  }
}

/// Machine-readable summary: ordered key=value lines.
using Summary = std::vector<std::pair<std::string, std::string>>;

inline void write_summary(const std::string& path, const Summary& kv) {
  atomic_write(path, [&](std::ostream& os) {
    for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
  });
}

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Line-oriented "key = value" config with [section] headers and # comments.
class Config {
public:
  static Config parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open config file: " + path);
    Config cfg;
    cfg.path_ = path;
    std::string line, section;
    long lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw ParseError(path, lineno, "unterminated section header");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        continue;
      }
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ParseError(path, lineno, "expected 'key = value'");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string val = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ParseError(path, lineno, "empty key");
      cfg.values_[section + "/" + key] = val;
    }
    return cfg;
  }

  bool has(const std::string& section, const std::string& key) const {
    return values_.count(section + "/" + key) != 0;
  }

  std::string get_string(const std::string& section, const std::string& key) const {
    auto it = values_.find(section + "/" + key);
    if (it == values_.end())
      throw ValidationError(path_ + ": missing required key [" + section + "] " + key);
    return it->second;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& dflt) const {
    auto it = values_.find(section + "/" + key);
    return it == values_.end() ? dflt : it->second;
  }

  double get_double(const std::string& section, const std::string& key) const {
    return to_double(section, key, get_string(section, key));
  }
  double get_double(const std::string& section, const std::string& key, double dflt) const {
    return has(section, key) ? get_double(section, key) : dflt;
  }

  long get_int(const std::string& section, const std::string& key) const {
    const std::string s = get_string(section, key);
    try {
      size_t pos = 0;
      const long v = std::stol(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(path_ + ": [" + section + "] " + key + ": not an integer: " + s);
    }
  }
  long get_int(const std::string& section, const std::string& key, long dflt) const {
    return has(section, key) ? get_int(section, key) : dflt;
  }

  std::vector<double> get_doubles(const std::string& section, const std::string& key) const {
    std::istringstream ls(get_string(section, key));
    std::vector<double> out;
    double v;
    while (ls >> v) out.push_back(v);
    if (!ls.eof())
      throw ValidationError(path_ + ": [" + section + "] " + key + ": expected numbers");
    return out;
  }

private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  double to_double(const std::string& section, const std::string& key,
                   const std::string& s) const {
    try {
      size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(path_ + ": [" + section + "] " + key + ": not a number: " + s);
    }
  }

  std::string path_;
  std::map<std::string, std::string> values_;
};

} // namespace tetsolve
