#include "mhscreen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mhscreen/error.hpp"
#include "mhscreen/rng.hpp"
#include "parallel.hpp"

namespace mhscreen {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) noexcept {
  tp += other.tp;
  fp += other.fp;
  tn += other.tn;
  fn += other.fn;
  return *this;
}

namespace {

void check_scored(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "scores and labels differ in length (" + std::to_string(scores.size()) +
                    " vs " + std::to_string(labels.size()) + ")");
  }
  if (scores.empty()) throw Error(ErrorCode::kInvalidArgument, "no scores to evaluate");
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorCode::kInvalidArgument, "non-finite score");
  }
}

bool has_both_classes(std::span<const Label> labels) {
  bool pos = false, neg = false;
  for (Label l : labels) (l == Label::kDiagnosed ? pos : neg) = true;
  return pos && neg;
}

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix confusion(std::span<const double> scores, std::span<const Label> labels,
                          double threshold) {
  check_scored(scores, labels);
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must lie in (0, 1)");
  }
  ConfusionMatrix m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == Label::kDiagnosed;
    if (predicted && actual) {
      ++m.tp;
    } else if (predicted) {
      ++m.fp;
    } else if (actual) {
      ++m.fn;
    } else {
      ++m.tn;
    }
  }
  return m;
}

Metrics metrics_from_confusion(const ConfusionMatrix& m) {
  if (m.total() == 0) throw Error(ErrorCode::kInvalidArgument, "empty confusion matrix");
  Metrics out;
  out.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(m.total());
  out.precision = ratio(m.tp, m.tp + m.fp);
  out.recall = ratio(m.tp, m.tp + m.fn);
  if (out.precision && out.recall && *out.precision + *out.recall > 0.0) {
    out.f1 = 2.0 * (*out.precision * *out.recall) / (*out.precision + *out.recall);
  }
  return out;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const Label> labels) {
  check_scored(scores, labels);
  const auto positives = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), Label::kDiagnosed));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kDegenerateData,
                "ROC needs both classes (TPR or FPR is undefined otherwise)");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] == Label::kDiagnosed ? tp : fp)++;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                            static_cast<double>(tp) / static_cast<double>(positives),
                            threshold});
  }
  curve.auc = trapezoid_auc(curve.points);
  return curve;
}

double trapezoid_auc(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

std::vector<std::vector<std::size_t>> kfold_split(
    std::size_t n, std::size_t k, std::uint64_t seed,
    std::optional<std::span<const Label>> stratify_labels) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k-fold needs k >= 2");
  if (n < k) {
    throw Error(ErrorCode::kInvalidArgument, "k-fold needs at least k items (n=" +
                                                 std::to_string(n) +
                                                 ", k=" + std::to_string(k) + ")");
  }
  Rng rng(seed);
  std::vector<std::size_t> sequence;
  sequence.reserve(n);
  if (stratify_labels) {
    const auto labels = *stratify_labels;
    if (labels.size() != n) {
      throw Error(ErrorCode::kInvalidArgument, "stratification labels must have length n");
    }
    for (Label label : {Label::kDiagnosed, Label::kControl}) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == label) members.push_back(i);
      }
      if (members.size() < k) {
        throw Error(ErrorCode::kStratification,
                    "class " + std::string(to_string(label)) + " has " +
                        std::to_string(members.size()) + " item(s), fewer than k=" +
                        std::to_string(k));
      }
      rng.shuffle(std::span(members));
      sequence.insert(sequence.end(), members.begin(), members.end());
    }
  } else {
    sequence.resize(n);
    std::iota(sequence.begin(), sequence.end(), std::size_t{0});
    rng.shuffle(std::span(sequence));
  }
  // Dealing round-robin over the (class-grouped) sequence balances both the
  // fold sizes and the per-class counts.
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t pos = 0; pos < sequence.size(); ++pos) {
    folds[pos % k].push_back(sequence[pos]);
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

std::size_t CvReport::valid_folds() const {
  return static_cast<std::size_t>(
      std::count_if(per_fold.begin(), per_fold.end(), [](const auto& f) { return f.valid; }));
}

namespace {

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(s.count));
  return s;
}

}  // namespace

CvReport cross_validate(std::span<const Label> labels, const FoldTrainer& trainer,
                        const CvOptions& options) {
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must lie in (0, 1)");
  }
  const auto folds =
      kfold_split(labels.size(), options.k, options.seed,
                  options.stratified ? std::optional(labels) : std::nullopt);

  CvReport report;
  report.k = options.k;
  report.seed = options.seed;
  report.threshold = options.threshold;
  report.stratified = options.stratified;
  report.per_fold.resize(options.k);
  std::vector<std::vector<double>> fold_scores(options.k);

  detail::parallel_for(options.k, options.workers, [&](std::size_t f) {
    FoldResult& result = report.per_fold[f];
    result.fold = f;
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train.begin(), train.end());
    const auto& test = folds[f];
    result.train_size = train.size();
    result.test_size = test.size();
    try {
      auto scores = trainer(train, test);
      if (scores.size() != test.size()) {
        throw Error(ErrorCode::kInvalidArgument, "trainer returned " +
                                                     std::to_string(scores.size()) +
                                                     " scores for " +
                                                     std::to_string(test.size()) + " items");
      }
      std::vector<Label> test_labels;
      for (std::size_t i : test) test_labels.push_back(labels[i]);
      result.confusion = confusion(scores, test_labels, options.threshold);
      result.metrics = metrics_from_confusion(result.confusion);
      if (has_both_classes(test_labels)) result.auc = roc_curve(scores, test_labels).auc;
      result.valid = true;
      fold_scores[f] = std::move(scores);
    } catch (const Error& e) {
      result.valid = false;
      result.error = e.what();
    }
  });

  std::map<std::string, std::vector<double>> values;
  for (std::size_t f = 0; f < options.k; ++f) {
    const FoldResult& r = report.per_fold[f];
    if (!r.valid) continue;
    values["accuracy"].push_back(r.metrics.accuracy);
    if (r.metrics.precision) values["precision"].push_back(*r.metrics.precision);
    if (r.metrics.recall) values["recall"].push_back(*r.metrics.recall);
    if (r.metrics.f1) values["f1"].push_back(*r.metrics.f1);
    if (r.auc) values["auc"].push_back(*r.auc);
    report.pooled_confusion += r.confusion;
    for (std::size_t i = 0; i < folds[f].size(); ++i) {
      report.pooled_scores.push_back(fold_scores[f][i]);
      report.pooled_labels.push_back(labels[folds[f][i]]);
    }
  }
  for (auto& [name, v] : values) report.aggregate[name] = summarize(v);
  if (!report.pooled_labels.empty() && has_both_classes(report.pooled_labels)) {
    report.pooled_roc = roc_curve(report.pooled_scores, report.pooled_labels);
  }
  return report;
}

Evaluation evaluate_scores(std::span<const double> scores, std::span<const Label> labels,
                           double threshold) {
  Evaluation out;
  out.confusion = confusion(scores, labels, threshold);
  out.metrics = metrics_from_confusion(out.confusion);
  if (has_both_classes(labels)) out.roc = roc_curve(scores, labels);
  return out;
}

}  // namespace mhscreen
