#include "mhscreen/utf8.hpp"

#include <gtest/gtest.h>

namespace mhscreen::utf8 {
namespace {

std::u32string decode_all(std::string_view s) {
  std::u32string out;
  std::size_t pos = 0;
  while (pos < s.size()) out.push_back(decode(s, pos));
  return out;
}

TEST(Utf8, DecodesAllWidths) {
  EXPECT_EQ(decode_all("a\xC3\xA9\xE2\x82\xAC\xF0\x9F\x98\xA2"),
            (std::u32string{U'a', 0xE9, 0x20AC, 0x1F622}));
}

TEST(Utf8, MalformedBytesBecomeReplacement) {
  EXPECT_EQ(decode_all("\xFF" "a"), (std::u32string{kReplacement, U'a'}));
  EXPECT_EQ(decode_all("\xC3"), (std::u32string{kReplacement}));
  // Overlong encoding of '/'.
  EXPECT_EQ(decode_all("\xC0\xAF").front(), kReplacement);
  // UTF-16 surrogate encoded directly.
  EXPECT_EQ(decode_all("\xED\xA0\x80").front(), kReplacement);
}

TEST(Utf8, FindInvalid) {
  EXPECT_FALSE(find_invalid("plain ascii"));
  EXPECT_FALSE(find_invalid("caf\xC3\xA9"));
  EXPECT_EQ(find_invalid("ok\xE2\x82"), 2u);
  EXPECT_FALSE(is_valid("\xF4\x90\x80\x80"));  // above U+10FFFF
}

TEST(Utf8, AppendRoundTrips) {
  for (char32_t cp : {char32_t{0x41}, char32_t{0xE9}, char32_t{0x20AC}, char32_t{0x1F494},
                      char32_t{0x10FFFF}}) {
    std::string s;
    append(s, cp);
    std::size_t pos = 0;
    EXPECT_EQ(decode(s, pos), cp);
    EXPECT_EQ(pos, s.size());
  }
}

}  // namespace
}  // namespace mhscreen::utf8
