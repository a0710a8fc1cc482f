#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pnp/vec.hpp"

namespace pnp {

/**
 * Declarative key-value configuration format:
 *   - one "key = value" per line
 *   - '#' starts a comment (whole line or trailing)
 *   - blank lines ignored; later keys override earlier ones
 */
using KeyValueMap = std::map<std::string, std::string>;

namespace detail {
inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}
}  // namespace detail

inline KeyValueMap parse_key_values(std::istream& in) {
  KeyValueMap kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(stripped.substr(0, eq));
    if (key.empty())
      throw InputError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = detail::trim(stripped.substr(eq + 1));
  }
  return kv;
}

inline KeyValueMap parse_key_values_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  return parse_key_values(in);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace pnp
