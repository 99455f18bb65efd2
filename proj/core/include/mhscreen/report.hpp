#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "mhscreen/eval.hpp"

namespace mhscreen {

// Rows are actual classes, columns predicted classes:
//   actual,predicted_diagnosed,predicted_control
//   diagnosed,<tp>,<fn>
//   control,<fp>,<tn>
std::string confusion_csv(const ConfusionMatrix& m);

// fpr,tpr,threshold per point; the leading point's threshold is "inf".
std::string roc_csv(const RocCurve& curve);

// Self-contained SVG documents.
std::string roc_svg(const RocCurve& curve, std::string_view title);
std::string confusion_svg(const ConfusionMatrix& m, std::string_view title);

// Plain-text per-fold and aggregate table for terminals.
std::string format_cv_table(const CvReport& report);

// Published accuracy / F1 / AUC for the four encoder checkpoints and the
// classical baselines. Documentation only: these need the original corpus.
struct ReferenceResult {
  std::string_view dataset;  // "tweets" or "bios"
  std::string_view model;
  double accuracy;
  double f1;
  double auc;
};

std::span<const ReferenceResult> reference_results();
std::string format_reference_table();

void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mhscreen
