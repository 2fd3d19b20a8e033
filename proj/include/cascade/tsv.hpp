#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace cascade::tsv {

/// Splits on every tab; empty fields are kept.
std::vector<std::string_view> split(std::string_view line);

/// Splits on runs of spaces/tabs; no empty fields.
std::vector<std::string_view> split_whitespace(std::string_view line);

/// Reads one line, strips a trailing '\r'. Returns false at end of stream.
bool read_line(std::istream& in, std::string& line);

bool has_whitespace(std::string_view s);

}  // namespace cascade::tsv
