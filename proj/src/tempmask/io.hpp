#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace tempmask {

std::string read_text_file(const std::filesystem::path& path);

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so readers only ever observe a complete file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace tempmask
