#include "synthtext/utf8.hpp"

namespace synthtext {
namespace {

// Decodes one code point starting at i; advances i past it.
char32_t decode_one(const std::string& s, std::size_t& i) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  char32_t c = b0;
  if ((b0 & 0x80u) == 0) {
    len = 1;
    c = b0;
  } else if ((b0 & 0xE0u) == 0xC0u) {
    len = 2;
    c = b0 & 0x1Fu;
  } else if ((b0 & 0xF0u) == 0xE0u) {
    len = 3;
    c = b0 & 0x0Fu;
  } else if ((b0 & 0xF8u) == 0xF0u) {
    len = 4;
    c = b0 & 0x07u;
  } else {
    ++i;
    return b0;  // stray continuation byte
  }
  if (i + len > s.size()) {
    ++i;
    return b0;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0u) != 0x80u) {
      ++i;
      return b0;
    }
    c = (c << 6) | (b & 0x3Fu);
  }
  i += len;
  return c;
}

}  // namespace

std::vector<char32_t> utf8_decode(const std::string& s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) out.push_back(decode_one(s, i));
  return out;
}

std::string utf8_encode(char32_t c) {
  std::string out;
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  }
  return out;
}

std::string utf8_encode(const std::vector<char32_t>& cs) {
  std::string out;
  for (char32_t c : cs) out += utf8_encode(c);
  return out;
}

std::size_t utf8_length(const std::string& s) {
  std::size_t i = 0, n = 0;
  while (i < s.size()) {
    decode_one(s, i);
    ++n;
  }
  return n;
}

std::string utf8_truncate(const std::string& s, std::size_t n) {
  std::size_t i = 0, count = 0;
  while (i < s.size() && count < n) {
    decode_one(s, i);
    ++count;
  }
  return s.substr(0, i);
}

}  // namespace synthtext
