#pragma once

#include <string>
#include <string_view>

namespace rescene {

std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
// Throws ParseError on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace rescene
