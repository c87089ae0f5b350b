#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gridrag::util {

std::string base64_encode(const std::vector<std::uint8_t>& data);
std::string base64_encode(std::string_view data);
// Throws gridrag::ParseError on invalid input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace gridrag::util
