#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "mhscreen/corpus.hpp"
#include "mhscreen/eval.hpp"
#include "mhscreen/features.hpp"
#include "mhscreen/models.hpp"

namespace mhscreen {

// Pipeline stages; each maps to a distinct process exit code.
enum class Stage { kConfig, kIngest, kPreprocess, kFeature, kTrain, kEvaluate };

std::string_view to_string(Stage stage);
int exit_code(Stage stage);  // 2..7

class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& message);
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

enum class FeatureKind { kWordBigram, kChar4gram, kEmbeddings, kScores };
enum class ModelKind { kLogistic, kMlp, kEmbeddingHead, kExternalScores };

std::string_view to_string(FeatureKind kind);
std::string_view to_string(ModelKind kind);
FeatureKind parse_feature_kind(std::string_view text);
ModelKind parse_model_kind(std::string_view text);

struct ExperimentConfig {
  std::filesystem::path users;
  std::optional<std::filesystem::path> tweets;
  std::optional<std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> scores;
  std::filesystem::path out_dir = "mhscreen-out";
  InputFormat format = InputFormat::kCsv;

  Source source = Source::kTweetsMerged;
  FeatureKind feature = FeatureKind::kWordBigram;
  ModelKind model = ModelKind::kLogistic;

  SplitSpec split;
  TrainConfig train;
  // Unset means the per-model default (0.1 linear models, 0.05 MLP).
  std::optional<double> learning_rate;
  std::size_t hidden_units = kDefaultHiddenUnits;
  Weighting weighting = Weighting::kTfidf;
  // Unset means 2 for tweet documents and 1 for bios.
  std::optional<std::size_t> min_df;

  std::size_t folds = 10;
  double threshold = kDecisionThreshold;
  // Cross-validate over the whole dataset instead of the training split.
  bool cv_full = false;
  unsigned workers = 1;
  bool svg = true;

  // Pairing and range checks only; touches no files.
  void validate() const;
  // Checks that every referenced input exists.
  void check_inputs() const;

  TrainConfig resolved_train_config() const;
  FeaturizerConfig resolved_featurizer() const;  // n-gram features only
};

struct CorpusCounts {
  std::size_t users = 0;
  std::size_t documents_in = 0;
  std::size_t omitted_users = 0;
  std::size_t dropped_skipped = 0;
  std::size_t dropped_emptied = 0;
  std::size_t dropped_below_min_chars = 0;
  // Kept documents with no external entry, and external entries with no
  // kept document.
  std::size_t unmatched_documents = 0;
  std::size_t unmatched_entries = 0;
  std::size_t used = 0;
  std::size_t cv_documents = 0;
  std::size_t held_out_documents = 0;
};

struct ExperimentResult {
  CvReport cv;
  std::optional<Evaluation> held_out;
  CorpusCounts counts;
  std::string report_json;
};

// ingest -> preprocess -> featurize -> cross-validate -> report. Writes
// report.json, confusion.csv, roc.csv, manifest.json and (optionally) SVG
// plots into config.out_dir. Throws StageError.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Rebuilds the configuration recorded in a manifest.json and verifies that
// the referenced inputs still hash to the recorded digests.
ExperimentConfig config_from_manifest(const std::filesystem::path& manifest_path);

// Hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

// Individual stages, exposed as CLI subcommands.

struct IngestSummary {
  std::size_t users = 0;
  std::size_t tweets = 0;
  std::size_t bios = 0;
  std::size_t documents = 0;
  std::size_t omitted_users = 0;
};

IngestSummary ingest_stage(const std::filesystem::path& users,
                           const std::optional<std::filesystem::path>& tweets,
                           InputFormat format, Source source,
                           const std::filesystem::path& out_documents);

struct PreprocessSummary {
  std::size_t documents = 0;
  std::size_t kept = 0;
  std::size_t skipped = 0;
  std::size_t emptied = 0;
  std::size_t below_min_chars = 0;
};

PreprocessSummary preprocess_stage(const std::filesystem::path& documents,
                                   const std::filesystem::path& out_clean,
                                   unsigned workers);

struct FeaturizeSummary {
  std::size_t documents = 0;
  std::size_t vocabulary_size = 0;
  std::size_t nonzeros = 0;
};

// Writes vocabulary.tsv and vectors.csv into out_dir.
FeaturizeSummary featurize_stage(const std::filesystem::path& clean,
                                 const FeaturizerConfig& featurizer,
                                 const std::filesystem::path& out_dir);

struct TrainRequest {
  std::filesystem::path clean;  // labels (and tokens for n-gram features)
  std::optional<std::filesystem::path> embeddings;
  FeatureKind feature = FeatureKind::kWordBigram;
  ModelKind model = ModelKind::kLogistic;
  TrainConfig train;
  std::size_t hidden_units = kDefaultHiddenUnits;
  FeaturizerConfig featurizer;
  std::filesystem::path out_model;
};

void train_stage(const TrainRequest& request);

struct EvaluateRequest {
  std::filesystem::path clean;
  std::optional<std::filesystem::path> model;       // for trained models
  std::optional<std::filesystem::path> embeddings;  // embedding_head input
  std::optional<std::filesystem::path> scores;      // external scores
  double threshold = kDecisionThreshold;
  std::filesystem::path out_dir;
  bool svg = true;
};

Evaluation evaluate_stage(const EvaluateRequest& request);

// Re-renders plots and a text table from a report.json written by
// run_experiment or evaluate_stage. Returns the text table.
std::string report_stage(const std::filesystem::path& report_json,
                         const std::filesystem::path& out_dir);

}  // namespace mhscreen
