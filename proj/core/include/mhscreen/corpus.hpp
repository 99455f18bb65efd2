#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mhscreen {

// Positive class is kDiagnosed.
enum class Label { kDiagnosed, kControl };

enum class Source { kTweetsMerged, kBio };

enum class InputFormat { kCsv, kJsonl };

std::string_view to_string(Label label);
std::string_view to_string(Source source);
std::string_view to_string(InputFormat format);

// Parse the literal spellings used in input files ("diagnosed", "control",
// "tweets_merged", "bio", "csv", "jsonl"). Throw Error on anything else.
Label parse_label(std::string_view text);
Source parse_source(std::string_view text);
InputFormat parse_input_format(std::string_view text);

struct UserRecord {
  std::string user_id;
  Label label = Label::kControl;
  std::optional<std::string> bio;
  std::vector<std::string> tweets;  // file order

  bool operator==(const UserRecord&) const = default;
};

struct Document {
  std::string user_id;
  Label label = Label::kControl;
  Source source = Source::kBio;
  std::string text;

  bool operator==(const Document&) const = default;
};

// Immutable collection of documents of one source kind.
class Dataset {
 public:
  // Validates the invariants (non-empty text, unique ids, one source kind).
  Dataset(Source source, std::vector<Document> documents,
          std::size_t omitted_users = 0);

  Source source() const noexcept { return source_; }
  std::span<const Document> documents() const noexcept { return documents_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }
  std::size_t class_count(Label label) const noexcept {
    return label == Label::kDiagnosed ? diagnosed_ : control_;
  }
  // Users that lacked the requested source when the dataset was built.
  std::size_t omitted_users() const noexcept { return omitted_; }

 private:
  Source source_;
  std::vector<Document> documents_;
  std::size_t diagnosed_ = 0;
  std::size_t control_ = 0;
  std::size_t omitted_ = 0;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool stratified = true;

  void validate() const;
};

// Reads the users file (user_id,label,bio) and, optionally, the tweets file
// (user_id,text). Rows sharing a user_id are aggregated; tweets keep file
// order. Records come back sorted by user_id so row order does not matter.
std::vector<UserRecord> load_users(
    const std::filesystem::path& users_path,
    const std::optional<std::filesystem::path>& tweets_path,
    InputFormat format);

// Tweets are joined with '\n'. Users lacking the requested source are
// skipped and counted in Dataset::omitted_users().
Dataset build_documents(std::span<const UserRecord> users, Source source);

// Deterministic for a given (dataset, spec). Both halves keep the input order.
std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset,
                                             const SplitSpec& spec);

// Documents JSONL: {"user_id","label","source","text"} per line.
void write_documents_jsonl(const std::filesystem::path& path,
                           std::span<const Document> documents);
std::vector<Document> read_documents_jsonl(const std::filesystem::path& path);

}  // namespace mhscreen
