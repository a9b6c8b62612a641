#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ecgdnn {

/// Splits one CSV line. Handles double-quoted fields with embedded commas
/// and doubled quotes ("" -> "). No multi-line fields.
std::vector<std::string> csv_split(std::string_view line);

/// Quotes a field if it contains a comma, quote, or newline.
std::string csv_quote(std::string_view field);

std::string csv_join(const std::vector<std::string>& fields);

/// Reads a whole text file; throws IoError if it cannot be opened.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

/// Reads a whole binary file.
std::vector<std::uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, const void* data, std::size_t size);

/// Splits file contents into lines; tolerates trailing "\r" and a missing
/// final newline. Empty trailing line is dropped.
std::vector<std::string> split_lines(std::string_view text);

}  // namespace ecgdnn
