#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ecglens::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields may hold separators, doubled quotes and
/// line breaks. A trailing newline does not produce an empty row.
std::vector<Row> parse(std::string_view text);

std::vector<Row> read_file(const std::filesystem::path& path);

/// Quotes a field only when it needs it.
std::string escape(std::string_view field);

std::string join(const Row& row);

}  // namespace ecglens::csv
