#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hetfit::text {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

// Strict full-field parse; rejects trailing garbage, empty fields and
// non-finite values.
std::optional<double> parse_double(std::string_view field);

std::string_view trim(std::string_view s);

// Splits on `sep` without quote handling; the toolkit's CSV files never
// quote fields.
std::vector<std::string> split(std::string_view line, char sep);

std::vector<std::string> lines(std::string_view content);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// 64-bit FNV-1a, used to content-address artifacts.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t value);

}  // namespace hetfit::text
