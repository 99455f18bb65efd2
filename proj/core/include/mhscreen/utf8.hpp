#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace mhscreen::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

// Decodes the code point starting at text[pos] and advances pos. Malformed
// sequences yield kReplacement and advance by one byte.
char32_t decode(std::string_view text, std::size_t& pos);

// Byte offset of the first malformed sequence, or nullopt if text is valid.
std::optional<std::size_t> find_invalid(std::string_view text);

inline bool is_valid(std::string_view text) { return !find_invalid(text); }

void append(std::string& out, char32_t cp);

}  // namespace mhscreen::utf8
