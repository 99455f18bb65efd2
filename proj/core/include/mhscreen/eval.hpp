#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mhscreen/corpus.hpp"

namespace mhscreen {

// Positive class is Label::kDiagnosed.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other) noexcept;
  bool operator==(const ConfusionMatrix&) const = default;
};

// An empty optional marks a metric whose denominator is zero.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

struct RocPoint {
  double fpr;
  double tpr;
  // Scores >= threshold are called positive at this point. The leading
  // (0, 0) point carries +infinity.
  double threshold;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// score >= threshold predicts diagnosed. threshold must lie in (0, 1).
ConfusionMatrix confusion(std::span<const double> scores, std::span<const Label> labels,
                          double threshold);

Metrics metrics_from_confusion(const ConfusionMatrix& m);

// Staircase over distinct scores in descending order, ties grouped into one
// step, with (0, 0) prepended and (1, 1) last.
RocCurve roc_curve(std::span<const double> scores, std::span<const Label> labels);

// Area under a piecewise-linear curve through the given points.
double trapezoid_auc(std::span<const RocPoint> points);

// Shuffled k-fold partition of 0..n-1. Fold sizes differ by at most one. When
// stratify_labels is given, each class is dealt round-robin so per-fold class
// counts also differ by at most one.
std::vector<std::vector<std::size_t>> kfold_split(
    std::size_t n, std::size_t k, std::uint64_t seed,
    std::optional<std::span<const Label>> stratify_labels = std::nullopt);

struct FoldResult {
  std::size_t fold = 0;
  bool valid = false;
  std::string error;  // set when the fold could not be trained
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  ConfusionMatrix confusion;
  Metrics metrics;
  std::optional<double> auc;  // empty when the test fold holds one class
};

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  std::size_t count = 0;  // folds where the metric was defined
};

struct CvReport {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  bool stratified = true;
  std::vector<FoldResult> per_fold;
  // keys: accuracy, precision, recall, f1, auc
  std::map<std::string, MetricSummary> aggregate;
  // Out-of-fold predictions from every valid fold.
  ConfusionMatrix pooled_confusion;
  std::optional<RocCurve> pooled_roc;
  std::vector<double> pooled_scores;
  std::vector<Label> pooled_labels;

  std::size_t valid_folds() const;
};

// Trains on `train` and returns one probability per index in `test`, in order.
// Throwing mhscreen::Error marks the fold invalid.
using FoldTrainer = std::function<std::vector<double>(
    std::span<const std::size_t> train, std::span<const std::size_t> test)>;

struct CvOptions {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  bool stratified = true;
  double threshold = 0.5;
  unsigned workers = 1;
};

CvReport cross_validate(std::span<const Label> labels, const FoldTrainer& trainer,
                        const CvOptions& options);

// Metrics and ROC for a single scored set (held-out evaluation).
struct Evaluation {
  ConfusionMatrix confusion;
  Metrics metrics;
  std::optional<RocCurve> roc;
};

Evaluation evaluate_scores(std::span<const double> scores, std::span<const Label> labels,
                           double threshold);

}  // namespace mhscreen
