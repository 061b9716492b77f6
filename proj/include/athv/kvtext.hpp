#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace athv {

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines. Blank lines and '#' comments are skipped;
/// anything else without '=' or with a repeated key is a parse error.
KeyValues parse_key_values(const std::string& text);
std::string format_key_values(const KeyValues& kv);

std::size_t kv_size(const KeyValues& kv, const std::string& key, std::size_t fallback);
double kv_double(const KeyValues& kv, const std::string& key, double fallback);
bool kv_bool(const KeyValues& kv, const std::string& key, bool fallback);
std::string kv_string(const KeyValues& kv, const std::string& key, const std::string& fallback);
std::uint64_t kv_u64(const KeyValues& kv, const std::string& key, std::uint64_t fallback);

/// Strips leading and trailing spaces, tabs and carriage returns.
std::string trim(const std::string& s);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace athv
