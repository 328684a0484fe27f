#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace affistack {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

/// Strict full-string parse; returns false on trailing garbage or empty input.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

std::vector<std::string_view> split(std::string_view text, char sep);
std::vector<std::string_view> split_lines(std::string_view text);
std::string_view trim(std::string_view text);

/// FNV-1a 64-bit content hash, rendered as 16 hex digits.
std::string content_hash(std::string_view bytes);

std::string read_file(const std::string& path);
/// Write through a temporary file and rename, so readers never see partial output.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace affistack
