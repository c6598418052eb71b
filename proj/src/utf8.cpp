#include "seqtag/utf8.hpp"

#include <stdexcept>

namespace seqtag::utf8 {
namespace {

// Returns the byte length of the codepoint starting at text[pos].
std::size_t sequence_length(std::string_view text, std::size_t pos) {
  const unsigned char lead = static_cast<unsigned char>(text[pos]);
  std::size_t len;
  if (lead < 0x80) {
    len = 1;
  } else if ((lead >> 5) == 0x6) {
    len = 2;
  } else if ((lead >> 4) == 0xe) {
    len = 3;
  } else if ((lead >> 3) == 0x1e) {
    len = 4;
  } else {
    throw std::runtime_error("malformed UTF-8 at byte offset " + std::to_string(pos));
  }
  if (pos + len > text.size()) {
    throw std::runtime_error("truncated UTF-8 sequence at byte offset " + std::to_string(pos));
  }
  for (std::size_t i = 1; i < len; ++i) {
    const unsigned char c = static_cast<unsigned char>(text[pos + i]);
    if ((c >> 6) != 0x2) {
      throw std::runtime_error("malformed UTF-8 continuation at byte offset " +
                               std::to_string(pos + i));
    }
  }
  return len;
}

}  // namespace

std::vector<std::string> split_codepoints(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t len = sequence_length(text, pos);
    out.emplace_back(text.substr(pos, len));
    pos += len;
  }
  return out;
}

std::size_t codepoint_count(std::string_view text) {
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    pos += sequence_length(text, pos);
    ++n;
  }
  return n;
}

}  // namespace seqtag::utf8
