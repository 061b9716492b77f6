#include "athv/kvtext.hpp"

#include <charconv>
#include <sstream>

#include "athv/error.hpp"

namespace athv {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::Parse, "line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), ErrorCode::Parse, "line " + std::to_string(lineno) + ": empty key");
    require(kv.emplace(key, trim(line.substr(eq + 1))).second, ErrorCode::Parse,
            "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::size_t kv_size(const KeyValues& kv, const std::string& key, std::size_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::size_t v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && p == s.data() + s.size(), ErrorCode::Parse,
          "key '" + key + "' expects a non-negative integer, got '" + s + "'");
  return v;
}

double kv_double(const KeyValues& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  double v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && p == s.data() + s.size(), ErrorCode::Parse,
          "key '" + key + "' expects a number, got '" + s + "'");
  return v;
}

bool kv_bool(const KeyValues& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw Error(ErrorCode::Parse, "key '" + key + "' expects a boolean, got '" + it->second + "'");
}

std::string kv_string(const KeyValues& kv, const std::string& key, const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::uint64_t kv_u64(const KeyValues& kv, const std::string& key, std::uint64_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::uint64_t v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && p == s.data() + s.size(), ErrorCode::Parse,
          "key '" + key + "' expects an unsigned integer, got '" + s + "'");
  return v;
}

}  // namespace athv
