#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace varest {

// Shortest round-trip decimal form; "nan" / "inf" / "-inf" for non-finite values.
std::string format_double(double value);
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);
std::uint64_t parse_u64(std::string_view text);

std::vector<std::string_view> split_view(std::string_view text, std::string_view sep);
std::vector<std::string> split_string(std::string_view text, std::string_view sep);
std::string_view trim(std::string_view text);

std::string join_doubles(std::span<const double> values, std::string_view sep);
std::vector<double> parse_double_list(std::string_view text, std::string_view sep = ",");

// FNV-1a over file bytes, hex encoded. Used to tag reports with their inputs.
std::string file_hash(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

// "key = value" lines; blank lines and lines starting with '#' are skipped.
// Later keys override earlier ones.
std::map<std::string, std::string> parse_key_values(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace varest
