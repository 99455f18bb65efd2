#pragma once

#include <string_view>

namespace mhscreen::detail {

// Raw contents of core/data/stopwords_en.txt and lemma_exceptions.txt.
std::string_view shipped_stopwords_text();
std::string_view shipped_lemma_exceptions_text();

}  // namespace mhscreen::detail
