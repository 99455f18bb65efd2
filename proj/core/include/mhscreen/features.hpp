#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mhscreen/preprocess.hpp"

namespace mhscreen {

enum class NgramKind { kWord, kChar };
enum class Weighting { kCount, kTfidf };

std::string_view to_string(NgramKind kind);
std::string_view to_string(Weighting weighting);
NgramKind parse_ngram_kind(std::string_view text);
Weighting parse_weighting(std::string_view text);

struct FeaturizerConfig {
  NgramKind kind = NgramKind::kWord;
  std::size_t n = 2;
  std::size_t min_df = 2;
  Weighting weighting = Weighting::kTfidf;

  static FeaturizerConfig word_bigrams() { return {NgramKind::kWord, 2, 2, Weighting::kTfidf}; }
  static FeaturizerConfig char_4grams() { return {NgramKind::kChar, 4, 1, Weighting::kTfidf}; }

  void validate() const;
  bool operator==(const FeaturizerConfig&) const = default;
};

struct SparseEntry {
  std::uint32_t index;
  double value;

  bool operator==(const SparseEntry&) const = default;
};

// Entries sorted by strictly increasing index, all finite and nonzero.
struct FeatureVector {
  std::vector<SparseEntry> entries;
  std::size_t dimension = 0;

  double squared_norm() const;
  bool operator==(const FeatureVector&) const = default;
};

// Sliding windows in text order. Word windows join tokens with one space;
// char windows run over the space-joined token string.
std::vector<std::string> extract_ngrams(std::span<const std::string> tokens,
                                        const FeaturizerConfig& config);
std::vector<std::string> extract_ngrams(const CleanDocument& document,
                                        const FeaturizerConfig& config);

class Vocabulary {
 public:
  struct Term {
    std::string text;
    std::size_t document_frequency;

    bool operator==(const Term&) const = default;
  };

  Vocabulary() = default;
  // terms must be sorted lexicographically and unique.
  Vocabulary(std::vector<Term> terms, std::size_t num_documents);

  std::size_t size() const noexcept { return terms_.size(); }
  std::size_t num_documents() const noexcept { return num_documents_; }
  std::optional<std::uint32_t> index_of(std::string_view term) const;
  const Term& term(std::uint32_t index) const { return terms_.at(index); }
  std::span<const Term> terms() const noexcept { return terms_; }

  // Smoothed inverse document frequency: ln((1 + N) / (1 + df)) + 1.
  double idf(std::uint32_t index) const;

  bool operator==(const Vocabulary&) const = default;

 private:
  std::vector<Term> terms_;
  std::size_t num_documents_ = 0;
};

// Dropped documents are ignored. Terms are indexed in lexicographic order.
Vocabulary build_vocabulary(std::span<const CleanDocument> corpus,
                            const FeaturizerConfig& config);

FeatureVector vectorize(const CleanDocument& document, const Vocabulary& vocab,
                        const FeaturizerConfig& config);

// term<TAB>index<TAB>df per line. The first line is a header comment
// "# documents=<N>".
void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::filesystem::path& path);

// doc_id,index,value per nonzero entry, with a header line.
void write_sparse_triplets(const std::filesystem::path& path,
                           std::span<const std::string> doc_ids,
                           std::span<const FeatureVector> vectors);

}  // namespace mhscreen
