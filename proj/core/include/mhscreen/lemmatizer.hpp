#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>

namespace mhscreen {

// Dictionary-exception lookup followed by ordered noun suffix rules:
//   possessive "'s" -> "", "sses" -> "ss", "ches"/"shes"/"xes"/"zzes" drop
//   "es", "ies" -> "y" (length >= 5), "s" -> "" (length >= 4, not after
//   's', 'u' or 'i').
// A rule result that is itself an exception key is mapped once more, so
// lemmatize(lemmatize(w)) == lemmatize(w).
class Lemmatizer {
 public:
  explicit Lemmatizer(std::unordered_map<std::string, std::string> exceptions);

  static const Lemmatizer& shipped();

  std::string lemmatize(std::string_view token) const;

  const std::unordered_map<std::string, std::string>& exceptions() const noexcept {
    return exceptions_;
  }

 private:
  std::string apply_rules(std::string_view word) const;

  std::unordered_map<std::string, std::string> exceptions_;
};

// "<inflected>\t<lemma>" per line; '#' comments and blank lines ignored.
std::unordered_map<std::string, std::string> parse_lemma_exceptions(
    std::string_view text);
std::unordered_map<std::string, std::string> load_lemma_exceptions(
    const std::filesystem::path& path);

}  // namespace mhscreen
