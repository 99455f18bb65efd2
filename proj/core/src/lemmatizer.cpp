#include "mhscreen/lemmatizer.hpp"

#include <sstream>

#include "io_util.hpp"
#include "mhscreen/error.hpp"
#include "shipped_data.hpp"

namespace mhscreen {

namespace {

bool ends_with(std::string_view word, std::string_view suffix) {
  return word.size() >= suffix.size() &&
         word.compare(word.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Lemmatizer::Lemmatizer(std::unordered_map<std::string, std::string> exceptions)
    : exceptions_(std::move(exceptions)) {}

const Lemmatizer& Lemmatizer::shipped() {
  static const Lemmatizer instance(
      parse_lemma_exceptions(detail::shipped_lemma_exceptions_text()));
  return instance;
}

std::string Lemmatizer::apply_rules(std::string_view word) const {
  const std::size_t n = word.size();
  auto drop = [&](std::size_t k, std::string_view add = {}) {
    std::string out(word.substr(0, n - k));
    out += add;
    return out;
  };
  if (n >= 5 && ends_with(word, "sses")) return drop(2);
  if (ends_with(word, "ss") || ends_with(word, "us") || ends_with(word, "is")) {
    return std::string(word);
  }
  if (n >= 5 && ends_with(word, "ies")) return drop(3, "y");
  if (n >= 5 && (ends_with(word, "ches") || ends_with(word, "shes"))) return drop(2);
  if (n >= 6 && ends_with(word, "zzes")) return drop(2);
  if (n >= 4 && ends_with(word, "xes")) return drop(2);
  if (n >= 4 && ends_with(word, "s")) return drop(1);
  return std::string(word);
}

std::string Lemmatizer::lemmatize(std::string_view token) const {
  std::string_view word = token;
  while (word.size() > 2 && ends_with(word, "'s")) word.remove_suffix(2);

  if (auto it = exceptions_.find(std::string(word)); it != exceptions_.end()) {
    return it->second;
  }
  std::string lemma = apply_rules(word);
  if (lemma.size() != word.size()) {
    if (auto it = exceptions_.find(lemma); it != exceptions_.end()) return it->second;
  }
  return lemma;
}

std::unordered_map<std::string, std::string> parse_lemma_exceptions(std::string_view text) {
  std::unordered_map<std::string, std::string> table;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorCode::kParse, "lemma exceptions line " + std::to_string(line_no) +
                                         ": expected <inflected>\\t<lemma>");
    }
    std::string form(trim(line.substr(0, tab)));
    std::string lemma(trim(line.substr(tab + 1)));
    if (form.empty() || lemma.empty()) {
      throw Error(ErrorCode::kParse,
                  "lemma exceptions line " + std::to_string(line_no) + ": empty field");
    }
    table.insert_or_assign(std::move(form), std::move(lemma));
  }
  return table;
}

std::unordered_map<std::string, std::string> load_lemma_exceptions(
    const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_lemma_exceptions(buffer.str());
}

}  // namespace mhscreen
