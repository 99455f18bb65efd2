#include "mhscreen/preprocess.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <optional>
#include <regex>
#include <sstream>

#include "io_util.hpp"
#include "mhscreen/error.hpp"
#include "mhscreen/lemmatizer.hpp"
#include "mhscreen/utf8.hpp"
#include "parallel.hpp"
#include "shipped_data.hpp"

namespace mhscreen {

using nlohmann::json;

std::vector<CodepointRange> default_emoji_ranges() {
  return {
      {0x200D, 0x200D},    // zero-width joiner
      {0x2600, 0x27BF},    // miscellaneous symbols, dingbats
      {0xFE00, 0xFE0F},    // variation selectors
      {0x1F1E6, 0x1F1FF},  // regional indicators (flags)
      {0x1F300, 0x1FAFF},  // pictographs, emoticons, transport, supplemental
  };
}

namespace {

std::unordered_set<std::string> parse_word_list(std::string_view text) {
  std::unordered_set<std::string> words;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    words.insert(line.substr(b, e - b + 1));
  }
  return words;
}

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r';
}

bool is_ascii_alpha(char32_t cp) {
  return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}

// Letter-bearing blocks outside ASCII: Latin-1 and Latin Extended letters,
// Greek through Ethiopic, Latin Extended Additional, kana and CJK, Hangul,
// fullwidth Latin. Punctuation and symbol blocks are excluded.
bool is_non_ascii_letter(char32_t cp) {
  if (cp >= 0xC0 && cp <= 0x24F) return cp != 0xD7 && cp != 0xF7;
  return (cp >= 0x370 && cp <= 0x1FFF) || (cp >= 0x3040 && cp <= 0x9FFF) ||
         (cp >= 0xAC00 && cp <= 0xD7AF) || (cp >= 0xF900 && cp <= 0xFAFF) ||
         (cp >= 0xFF21 && cp <= 0xFF3A) || (cp >= 0xFF41 && cp <= 0xFF5A);
}

std::string_view ltrim(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && is_ascii_space(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

bool is_blank(std::string_view s) { return ltrim(s).empty(); }

std::bitset<128> parse_char_class(std::string_view spec) {
  std::bitset<128> set;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto c = static_cast<unsigned char>(spec[i]);
    if (c >= 128) {
      throw Error(ErrorCode::kConfiguration, "allowed_chars must be ASCII");
    }
    if (i + 2 < spec.size() && spec[i + 1] == '-') {
      const auto hi = static_cast<unsigned char>(spec[i + 2]);
      if (hi >= 128 || hi < c) {
        throw Error(ErrorCode::kConfiguration,
                    "invalid range in allowed_chars: " + std::string(spec.substr(i, 3)));
      }
      for (unsigned v = c; v <= hi; ++v) set.set(v);
      i += 2;
    } else {
      set.set(c);
    }
  }
  return set;
}

bool matches_at(std::string_view s, std::size_t i, std::string_view prefix) {
  return s.compare(i, prefix.size(), prefix) == 0;
}

}  // namespace

const std::unordered_set<std::string>& shipped_stopwords() {
  static const auto words = parse_word_list(detail::shipped_stopwords_text());
  return words;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_word_list(buffer.str());
}

void PreprocessConfig::validate() const {
  if (min_chars < 1) throw Error(ErrorCode::kConfiguration, "min_chars must be >= 1");
  for (const auto& w : stopwords) {
    if (std::any_of(w.begin(), w.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) {
      throw Error(ErrorCode::kConfiguration, "stopword '" + w + "' is not lowercase");
    }
  }
  auto ranges = emoji_ranges;
  std::sort(ranges.begin(), ranges.end(),
            [](const CodepointRange& a, const CodepointRange& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (ranges[i].first > ranges[i].last || ranges[i].last > 0x10FFFF) {
      throw Error(ErrorCode::kConfiguration, "invalid emoji codepoint range");
    }
    if (i > 0 && ranges[i].first <= ranges[i - 1].last) {
      throw Error(ErrorCode::kConfiguration, "emoji codepoint ranges overlap");
    }
  }
  parse_char_class(allowed_chars);
  if (url_pattern.empty()) throw Error(ErrorCode::kConfiguration, "url_pattern is empty");
}

std::string_view to_string(SkipReason reason) {
  switch (reason) {
    case SkipReason::kNone: return "none";
    case SkipReason::kNonEnglish: return "non_english";
    case SkipReason::kRetweet: return "retweet";
    case SkipReason::kMention: return "mention";
  }
  return "none";
}

std::string_view to_string(DropReason reason) {
  switch (reason) {
    case DropReason::kNone: return "none";
    case DropReason::kSkipped: return "skipped";
    case DropReason::kEmptied: return "emptied";
    case DropReason::kBelowMinChars: return "below_min_chars";
  }
  return "none";
}

DropReason parse_drop_reason(std::string_view text) {
  for (DropReason r : {DropReason::kNone, DropReason::kSkipped, DropReason::kEmptied,
                       DropReason::kBelowMinChars}) {
    if (to_string(r) == text) return r;
  }
  throw Error(ErrorCode::kParse, "unknown drop reason '" + std::string(text) + "'");
}

std::string CleanDocument::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view cleaned) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < cleaned.size()) {
    std::size_t end = cleaned.find(' ', pos);
    if (end == std::string_view::npos) end = cleaned.size();
    std::string_view tok = cleaned.substr(pos, end - pos);
    while (!tok.empty() && tok.front() == '\'') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == '\'') tok.remove_suffix(1);
    if (!tok.empty()) tokens.emplace_back(tok);
    pos = end + 1;
  }
  return tokens;
}

std::string lemmatize(std::string_view token) {
  return Lemmatizer::shipped().lemmatize(token);
}

struct Preprocessor::Impl {
  // Only compiled when the configured pattern differs from the default one,
  // which has a hand-written scanner.
  std::optional<std::regex> url_regex;
};

Preprocessor::Preprocessor(PreprocessConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  config_.validate();
  allowed_ = parse_char_class(config_.allowed_chars);
  if (config_.url_pattern != kDefaultUrlPattern) {
    try {
      impl_->url_regex.emplace(config_.url_pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::kConfiguration, "invalid url_pattern: " + std::string(e.what()));
    }
  }
  std::sort(config_.emoji_ranges.begin(), config_.emoji_ranges.end(),
            [](const CodepointRange& a, const CodepointRange& b) { return a.first < b.first; });
}

Preprocessor::~Preprocessor() = default;
Preprocessor::Preprocessor(Preprocessor&&) noexcept = default;
Preprocessor& Preprocessor::operator=(Preprocessor&&) noexcept = default;

bool Preprocessor::is_emoji(char32_t cp) const {
  for (const CodepointRange& r : config_.emoji_ranges) {
    if (cp < r.first) return false;
    if (cp <= r.last) return true;
  }
  return false;
}

bool Preprocessor::looks_english(std::string_view value) const {
  std::size_t letters = 0;
  std::size_t ascii_letters = 0;
  std::size_t pos = 0;
  while (pos < value.size()) {
    const char32_t cp = utf8::decode(value, pos);
    if (is_ascii_alpha(cp)) {
      ++letters;
      ++ascii_letters;
    } else if (is_non_ascii_letter(cp)) {
      ++letters;
    }
  }
  if (letters == 0 || ascii_letters * 10 >= letters * 9) return true;

  // Fallback: at least two distinct shipped stopwords. Always the shipped list
  // so a custom stopword set cannot change which values are skipped.
  const auto& stopwords = shipped_stopwords();
  std::string word;
  std::vector<std::string> seen;
  auto flush = [&] {
    if (!word.empty() && stopwords.contains(word) &&
        std::find(seen.begin(), seen.end(), word) == seen.end()) {
      seen.push_back(word);
    }
    word.clear();
    return seen.size() >= 2;
  };
  for (char c : value) {
    if (is_ascii_alpha(static_cast<unsigned char>(c)) || c == '\'') {
      word.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    } else if (flush()) {
      return true;
    }
  }
  return flush();
}

SkipDecision Preprocessor::should_skip(std::string_view value) const {
  const std::string_view v = ltrim(value);
  if (v.starts_with("RT") &&
      (v.size() == 2 || v[2] == '@' || is_ascii_space(static_cast<unsigned char>(v[2])))) {
    return {true, SkipReason::kRetweet};
  }
  if (v.starts_with('@')) return {true, SkipReason::kMention};
  if (!looks_english(value)) return {true, SkipReason::kNonEnglish};
  return {};
}

void Preprocessor::remove_urls(std::string_view value, std::string& out) const {
  if (impl_->url_regex) {
    out = std::regex_replace(std::string(value), *impl_->url_regex, "");
    return;
  }
  // (https?://|www\.)\S+
  out.clear();
  out.reserve(value.size());
  std::size_t i = 0;
  while (i < value.size()) {
    std::size_t prefix = 0;
    const char c = value[i];
    if (c == 'h') {
      if (matches_at(value, i, "https://")) {
        prefix = 8;
      } else if (matches_at(value, i, "http://")) {
        prefix = 7;
      }
    } else if (c == 'w' && matches_at(value, i, "www.")) {
      prefix = 4;
    }
    if (prefix && i + prefix < value.size() &&
        !is_ascii_space(static_cast<unsigned char>(value[i + prefix]))) {
      i += prefix;
      while (i < value.size() && !is_ascii_space(static_cast<unsigned char>(value[i]))) ++i;
      continue;
    }
    out.push_back(c);
    ++i;
  }
}

std::string Preprocessor::clean_text(std::string_view value) const {
  std::string stripped;
  remove_urls(value, stripped);

  std::string out;
  out.reserve(stripped.size());
  bool pending_space = false;
  std::size_t pos = 0;
  while (pos < stripped.size()) {
    const char32_t cp = utf8::decode(stripped, pos);
    if (is_emoji(cp)) continue;
    char keep = ' ';
    if (cp < 128) {
      char c = static_cast<char>(cp);
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      if (allowed_.test(static_cast<unsigned char>(c))) keep = c;
    }
    if (keep == ' ') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(keep);
  }
  return out;
}

std::vector<std::string> Preprocessor::remove_stopwords(std::vector<std::string> tokens) const {
  std::erase_if(tokens, [&](const std::string& t) { return config_.stopwords.contains(t); });
  return tokens;
}

CleanDocument Preprocessor::process(const Document& document) const {
  CleanDocument out{document.user_id, document.label, document.source, {}, DropReason::kNone};

  std::string survivors;
  bool kept_any = false;
  bool saw_value = false;
  auto consider = [&](std::string_view value) {
    if (is_blank(value)) return;
    saw_value = true;
    if (should_skip(value).skip) return;
    if (kept_any) survivors.push_back('\n');
    survivors += value;
    kept_any = true;
  };
  if (document.source == Source::kTweetsMerged) {
    std::string_view text = document.text;
    while (true) {
      const auto nl = text.find('\n');
      consider(text.substr(0, nl));
      if (nl == std::string_view::npos) break;
      text.remove_prefix(nl + 1);
    }
  } else {
    consider(document.text);
  }
  if (!kept_any) {
    out.drop_reason = saw_value ? DropReason::kSkipped : DropReason::kEmptied;
    return out;
  }

  const std::string cleaned = clean_text(survivors);
  if (cleaned.empty()) {
    out.drop_reason = DropReason::kEmptied;
    return out;
  }
  auto tokens = remove_stopwords(tokenize(cleaned));
  if (config_.apply_lemmatization) {
    const Lemmatizer& lemmatizer = Lemmatizer::shipped();
    for (auto& t : tokens) t = lemmatizer.lemmatize(t);
    // A lemma can land on a stopword ("others" -> "other").
    tokens = remove_stopwords(std::move(tokens));
  }
  out.tokens = std::move(tokens);
  if (out.joined().size() < config_.min_chars) {
    out.tokens.clear();
    out.drop_reason = DropReason::kBelowMinChars;
  }
  return out;
}

std::vector<CleanDocument> Preprocessor::process_all(std::span<const Document> documents,
                                                     unsigned workers) const {
  std::vector<CleanDocument> out(documents.size());
  detail::parallel_for(documents.size(), workers,
                       [&](std::size_t i) { out[i] = process(documents[i]); });
  return out;
}

void write_clean_jsonl(const std::filesystem::path& path,
                       std::span<const CleanDocument> documents) {
  auto out = detail::open_output(path);
  for (const CleanDocument& doc : documents) {
    json obj = {{"user_id", doc.user_id},
                {"label", to_string(doc.label)},
                {"source", to_string(doc.source)},
                {"tokens", doc.tokens},
                {"dropped", doc.dropped()},
                {"drop_reason", to_string(doc.drop_reason)}};
    out << obj.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<CleanDocument> read_clean_jsonl(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<CleanDocument> docs;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    detail::chomp(line);
    if (is_blank(line)) continue;
    try {
      const json obj = json::parse(line);
      CleanDocument doc;
      doc.user_id = obj.at("user_id").get<std::string>();
      doc.label = parse_label(obj.at("label").get<std::string>());
      doc.source = obj.contains("source") ? parse_source(obj["source"].get<std::string>())
                                          : Source::kTweetsMerged;
      doc.tokens = obj.at("tokens").get<std::vector<std::string>>();
      const bool dropped = obj.at("dropped").get<bool>();
      if (obj.contains("drop_reason")) {
        doc.drop_reason = parse_drop_reason(obj["drop_reason"].get<std::string>());
      } else {
        doc.drop_reason = dropped ? DropReason::kSkipped : DropReason::kNone;
      }
      if (dropped != doc.dropped()) {
        throw Error(ErrorCode::kParse, "dropped flag disagrees with drop_reason");
      }
      docs.push_back(std::move(doc));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, detail::where(path, number) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, detail::where(path, number) + ": " + e.what());
    }
  }
  return docs;
}

}  // namespace mhscreen
