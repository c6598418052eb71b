#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace seqtag::utf8 {

// Splits UTF-8 text into one std::string per codepoint.
// Throws std::runtime_error on malformed input.
std::vector<std::string> split_codepoints(std::string_view text);

// Number of codepoints in valid UTF-8 text.
std::size_t codepoint_count(std::string_view text);

}  // namespace seqtag::utf8
