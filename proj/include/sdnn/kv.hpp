#pragma once

// Plain key=value files: one pair per line, '#' starts a comment, blank lines
// are ignored, whitespace around keys and values is trimmed.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "sdnn/error.hpp"

namespace sdnn {

using KeyValues = std::map<std::string, std::string>;

namespace detail {
inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}
}  // namespace detail

inline KeyValues parse_key_values(std::string_view text,
                                  const std::string& origin = "<string>") {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": expected key=value");
    }
    out[std::string(detail::trim(line.substr(0, eq)))] =
        std::string(detail::trim(line.substr(eq + 1)));
  }
  return out;
}

inline KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str(), path);
}

inline std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

}  // namespace sdnn
