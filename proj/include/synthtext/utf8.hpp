#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace synthtext {

// Minimal UTF-8 handling. Invalid bytes are treated as single-byte
// code points in the Latin-1 range so malformed input never throws.

std::vector<char32_t> utf8_decode(const std::string& s);

std::string utf8_encode(char32_t c);
std::string utf8_encode(const std::vector<char32_t>& cs);

// Number of code points.
std::size_t utf8_length(const std::string& s);

// Truncates to at most n code points.
std::string utf8_truncate(const std::string& s, std::size_t n);

}  // namespace synthtext
