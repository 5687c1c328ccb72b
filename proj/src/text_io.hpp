// Internal file and CSV helpers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace camdiff::detail {

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_text_file(const std::filesystem::path& path, std::string_view text);
void write_binary_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Non-empty lines with any trailing '\r' removed.
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string_view> split_fields(std::string_view line);

double parse_double(std::string_view field, std::string_view context);
std::size_t parse_index(std::string_view field, std::string_view context);

/// Round-trip exact text form of a double.
std::string format_real(double v);

}  // namespace camdiff::detail
