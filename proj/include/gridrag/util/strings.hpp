#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gridrag::util {

std::string to_lower(std::string_view s);

// Lowercased, split on anything that is not alnum / '.' / ','; numeric
// tokens keep digits, separators and decimal points verbatim so values
// like "1,200.00" survive as one token.
std::vector<std::string> tokenize(std::string_view text);

bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

std::string read_file(const std::string& path);        // throws FileNotFound
void write_file(const std::string& path, std::string_view content);
// Write to a temp file in the same directory, then rename over the target.
void write_file_atomic(const std::string& path, std::string_view content);

std::string replace_all(std::string s, std::string_view from, std::string_view to);

}  // namespace gridrag::util
