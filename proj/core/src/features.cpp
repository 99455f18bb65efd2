#include "mhscreen/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "csv.hpp"
#include "io_util.hpp"
#include "mhscreen/error.hpp"

namespace mhscreen {

std::string_view to_string(NgramKind kind) { return kind == NgramKind::kWord ? "word" : "char"; }

std::string_view to_string(Weighting weighting) {
  return weighting == Weighting::kCount ? "count" : "tfidf";
}

NgramKind parse_ngram_kind(std::string_view text) {
  if (text == "word") return NgramKind::kWord;
  if (text == "char") return NgramKind::kChar;
  throw Error(ErrorCode::kConfiguration, "unknown n-gram kind '" + std::string(text) + "'");
}

Weighting parse_weighting(std::string_view text) {
  if (text == "count") return Weighting::kCount;
  if (text == "tfidf") return Weighting::kTfidf;
  throw Error(ErrorCode::kConfiguration, "unknown weighting '" + std::string(text) + "'");
}

void FeaturizerConfig::validate() const {
  if (n < 1) throw Error(ErrorCode::kConfiguration, "n-gram size must be >= 1");
  if (min_df < 1) throw Error(ErrorCode::kConfiguration, "min_df must be >= 1");
}

double FeatureVector::squared_norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.value * e.value;
  return s;
}

std::vector<std::string> extract_ngrams(std::span<const std::string> tokens,
                                        const FeaturizerConfig& config) {
  std::vector<std::string> grams;
  if (config.kind == NgramKind::kWord) {
    if (tokens.size() < config.n) return grams;
    grams.reserve(tokens.size() - config.n + 1);
    for (std::size_t i = 0; i + config.n <= tokens.size(); ++i) {
      std::string g = tokens[i];
      for (std::size_t j = 1; j < config.n; ++j) {
        g.push_back(' ');
        g += tokens[i + j];
      }
      grams.push_back(std::move(g));
    }
    return grams;
  }
  std::string joined;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) joined.push_back(' ');
    joined += tokens[i];
  }
  if (joined.size() < config.n) return grams;
  grams.reserve(joined.size() - config.n + 1);
  for (std::size_t i = 0; i + config.n <= joined.size(); ++i) {
    grams.push_back(joined.substr(i, config.n));
  }
  return grams;
}

std::vector<std::string> extract_ngrams(const CleanDocument& document,
                                        const FeaturizerConfig& config) {
  return extract_ngrams(std::span<const std::string>(document.tokens), config);
}

Vocabulary::Vocabulary(std::vector<Term> terms, std::size_t num_documents)
    : terms_(std::move(terms)), num_documents_(num_documents) {
  for (std::size_t i = 1; i < terms_.size(); ++i) {
    if (!(terms_[i - 1].text < terms_[i].text)) {
      throw Error(ErrorCode::kInvalidArgument, "vocabulary terms must be sorted and unique");
    }
  }
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view term) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), term,
                             [](const Term& t, std::string_view v) { return t.text < v; });
  if (it == terms_.end() || it->text != term) return std::nullopt;
  return static_cast<std::uint32_t>(it - terms_.begin());
}

double Vocabulary::idf(std::uint32_t index) const {
  const double df = static_cast<double>(terms_.at(index).document_frequency);
  const double n = static_cast<double>(num_documents_);
  return std::log((1.0 + n) / (1.0 + df)) + 1.0;
}

Vocabulary build_vocabulary(std::span<const CleanDocument> corpus,
                            const FeaturizerConfig& config) {
  config.validate();
  std::unordered_map<std::string, std::size_t> df;
  std::size_t documents = 0;
  for (const CleanDocument& doc : corpus) {
    if (doc.dropped()) continue;
    ++documents;
    auto grams = extract_ngrams(doc, config);
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    for (auto& g : grams) ++df[std::move(g)];
  }
  if (documents == 0) {
    throw Error(ErrorCode::kEmptyDataset, "vocabulary corpus has no usable documents");
  }
  std::vector<Vocabulary::Term> terms;
  for (auto& [text, count] : df) {
    if (count >= config.min_df) terms.push_back({text, count});
  }
  if (terms.empty()) {
    throw Error(ErrorCode::kConfiguration,
                "vocabulary is empty after min_df=" + std::to_string(config.min_df) + " pruning");
  }
  std::sort(terms.begin(), terms.end(),
            [](const auto& a, const auto& b) { return a.text < b.text; });
  return Vocabulary(std::move(terms), documents);
}

FeatureVector vectorize(const CleanDocument& document, const Vocabulary& vocab,
                        const FeaturizerConfig& config) {
  FeatureVector out;
  out.dimension = vocab.size();
  if (document.dropped()) return out;

  std::vector<std::uint32_t> hits;
  for (const auto& g : extract_ngrams(document, config)) {
    if (auto idx = vocab.index_of(g)) hits.push_back(*idx);
  }
  std::sort(hits.begin(), hits.end());
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i;
    while (j < hits.size() && hits[j] == hits[i]) ++j;
    out.entries.push_back({hits[i], static_cast<double>(j - i)});
    i = j;
  }
  if (config.weighting == Weighting::kTfidf && !out.entries.empty()) {
    for (auto& e : out.entries) e.value *= vocab.idf(e.index);
    const double norm = std::sqrt(out.squared_norm());
    for (auto& e : out.entries) e.value /= norm;
  }
  return out;
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto out = detail::open_output(path);
  out << "# documents=" << vocab.num_documents() << '\n';
  const auto terms = vocab.terms();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    out << terms[i].text << '\t' << i << '\t' << terms[i].document_frequency << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

namespace {

std::size_t parse_size(std::string_view s, const std::string& at) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParse, at + ": expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

Vocabulary read_vocabulary(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  std::size_t number = 0;
  std::size_t documents = 0;
  std::vector<Vocabulary::Term> terms;
  while (std::getline(in, line)) {
    ++number;
    detail::chomp(line);
    const std::string at = detail::where(path, number);
    if (line.starts_with("# documents=")) {
      documents = parse_size(std::string_view(line).substr(12), at);
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw Error(ErrorCode::kParse, at + ": expected term<TAB>index<TAB>df");
    }
    const std::string_view view(line);
    const std::size_t index = parse_size(view.substr(t1 + 1, t2 - t1 - 1), at);
    if (index != terms.size()) {
      throw Error(ErrorCode::kParse, at + ": indices must run 0..V-1 without gaps");
    }
    terms.push_back({line.substr(0, t1), parse_size(view.substr(t2 + 1), at)});
  }
  try {
    return Vocabulary(std::move(terms), documents);
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

void write_sparse_triplets(const std::filesystem::path& path,
                           std::span<const std::string> doc_ids,
                           std::span<const FeatureVector> vectors) {
  if (doc_ids.size() != vectors.size()) {
    throw Error(ErrorCode::kInvalidArgument, "doc_ids and vectors differ in length");
  }
  auto out = detail::open_output(path);
  out << "doc_id,index,value\n";
  char buf[64];
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const std::string id = detail::csv_escape(doc_ids[i]);
    for (const auto& e : vectors[i].entries) {
      auto res = std::to_chars(buf, buf + sizeof buf, e.value);
      out << id << ',' << e.index << ',' << std::string_view(buf, res.ptr - buf) << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace mhscreen
