#pragma once

#include <bitset>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "mhscreen/corpus.hpp"

namespace mhscreen {

struct CodepointRange {
  char32_t first;
  char32_t last;  // inclusive

  bool contains(char32_t cp) const noexcept { return cp >= first && cp <= last; }
};

inline constexpr std::string_view kDefaultUrlPattern = R"((https?://|www\.)\S+)";
inline constexpr std::string_view kDefaultAllowedChars = "a-z0-9'";

std::vector<CodepointRange> default_emoji_ranges();

// Shipped NLTK-style English stopword list (core/data/stopwords_en.txt).
const std::unordered_set<std::string>& shipped_stopwords();

// One lowercase word per line; blank lines and '#' comments are ignored.
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

struct PreprocessConfig {
  std::string url_pattern{kDefaultUrlPattern};
  std::vector<CodepointRange> emoji_ranges = default_emoji_ranges();
  // Character class of the lowercase form of characters that survive
  // sanitization, e.g. "a-z0-9'". Space is always kept.
  std::string allowed_chars{kDefaultAllowedChars};
  std::unordered_set<std::string> stopwords = shipped_stopwords();
  std::size_t min_chars = 5;
  bool apply_lemmatization = true;

  void validate() const;
};

enum class SkipReason { kNone, kNonEnglish, kRetweet, kMention };

struct SkipDecision {
  bool skip = false;
  SkipReason reason = SkipReason::kNone;

  bool operator==(const SkipDecision&) const = default;
};

enum class DropReason {
  kNone,
  kSkipped,        // every value was skipped (retweet / mention / non-English)
  kEmptied,        // nothing left after clean_text
  kBelowMinChars,  // joined tokens shorter than min_chars (including zero tokens)
};

std::string_view to_string(SkipReason reason);
std::string_view to_string(DropReason reason);
DropReason parse_drop_reason(std::string_view text);

struct CleanDocument {
  std::string user_id;
  Label label = Label::kControl;
  Source source = Source::kBio;
  std::vector<std::string> tokens;
  DropReason drop_reason = DropReason::kNone;

  bool dropped() const noexcept { return drop_reason != DropReason::kNone; }
  // Tokens joined by single spaces.
  std::string joined() const;

  bool operator==(const CleanDocument&) const = default;
};

// Splits on single spaces, trims apostrophes at token edges and drops empty
// tokens.
std::vector<std::string> tokenize(std::string_view cleaned);

// Noun-mode lemma using the shipped exception table and suffix rules.
std::string lemmatize(std::string_view token);

// Compiled form of a PreprocessConfig. Immutable after construction and safe
// to share across threads.
class Preprocessor {
 public:
  explicit Preprocessor(PreprocessConfig config = {});
  ~Preprocessor();
  Preprocessor(Preprocessor&&) noexcept;
  Preprocessor& operator=(Preprocessor&&) noexcept;

  const PreprocessConfig& config() const noexcept { return config_; }

  SkipDecision should_skip(std::string_view value) const;

  // URL removal, emoji removal, sanitization, lowercasing and whitespace
  // collapse, in that order.
  std::string clean_text(std::string_view value) const;

  std::vector<std::string> remove_stopwords(std::vector<std::string> tokens) const;

  // The full per-document loop. Tweet documents are skip-checked line by line
  // before the surviving lines are cleaned together.
  CleanDocument process(const Document& document) const;

  // Order of the result matches the input regardless of worker count.
  std::vector<CleanDocument> process_all(std::span<const Document> documents,
                                         unsigned workers = 1) const;

  // True when the English heuristic accepts the value.
  bool looks_english(std::string_view value) const;

 private:
  void remove_urls(std::string_view value, std::string& out) const;
  bool is_emoji(char32_t cp) const;

  struct Impl;
  PreprocessConfig config_;
  std::unique_ptr<Impl> impl_;
  std::bitset<128> allowed_;
};

// Cleaned-corpus JSONL: {"user_id","label","tokens":[...],"dropped":bool}
// plus "source" and "drop_reason".
void write_clean_jsonl(const std::filesystem::path& path,
                       std::span<const CleanDocument> documents);
std::vector<CleanDocument> read_clean_jsonl(const std::filesystem::path& path);

}  // namespace mhscreen
