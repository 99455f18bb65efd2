#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mhscreen/corpus.hpp"
#include "mhscreen/error.hpp"

namespace mhscreen {

// Short aliases for the four pretrained checkpoints the sidecar knows about.
struct Checkpoint {
  std::string_view alias;
  std::string_view identifier;
};

std::span<const Checkpoint> known_checkpoints();
std::optional<std::string_view> checkpoint_identifier(std::string_view alias);

// Values are stored as float: the file contract writes 9 significant digits,
// which round-trips single precision exactly.
struct EmbeddingSet {
  std::string model_name;
  std::size_t dim = 0;
  std::map<std::string, std::vector<float>> entries;

  bool operator==(const EmbeddingSet&) const = default;
};

struct ScoreSet {
  std::string model_name;
  std::map<std::string, double> entries;  // user_id -> p_diagnosed

  bool operator==(const ScoreSet&) const = default;
};

// Header {"model_name","dim"} then {"user_id","vector":[...]} per line.
EmbeddingSet load_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);

// Header {"model_name"} then {"user_id","p_diagnosed"} per line.
ScoreSet load_scores(const std::filesystem::path& path);
void write_scores(const std::filesystem::path& path, const ScoreSet& set);

template <typename Value>
struct Alignment {
  // (index into the document sequence, value) in document order.
  std::vector<std::pair<std::size_t, Value>> pairs;
  std::size_t unmatched_documents = 0;
  std::size_t unmatched_entries = 0;
};

// Pairs every document whose user_id appears in the set, keeping document
// order. Works for Document, CleanDocument or anything with a user_id.
template <typename Doc, typename Value>
Alignment<Value> align(std::span<const Doc> documents,
                       const std::map<std::string, Value>& entries) {
  Alignment<Value> out;
  std::size_t matched = 0;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    auto it = entries.find(documents[i].user_id);
    if (it == entries.end()) {
      ++out.unmatched_documents;
      continue;
    }
    out.pairs.emplace_back(i, it->second);
    ++matched;
  }
  if (out.pairs.empty()) {
    throw Error(ErrorCode::kAlignment,
                "no user_id shared between the documents and the external set");
  }
  out.unmatched_entries = entries.size() - matched;
  return out;
}

inline Alignment<std::vector<float>> align(const Dataset& dataset,
                                           const EmbeddingSet& set) {
  return align(dataset.documents(), set.entries);
}

inline Alignment<double> align(const Dataset& dataset, const ScoreSet& set) {
  return align(dataset.documents(), set.entries);
}

}  // namespace mhscreen
