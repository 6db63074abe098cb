#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evlab/common.hpp"

// Binary classification metrics and ROC/AUROC. Scores are kept as fractions
// here; formatting as percentages happens at the CLI boundary only.

namespace evlab {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

/// labels and predictions are 0/1, positive class = 1.
ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions);

/// A ratio whose denominator may be empty; degenerate marks the 0/0 case and
/// the value is then 0.
struct Metric {
  double value = 0.0;
  bool degenerate = false;
};

Metric accuracy(const ConfusionCounts& c);
Metric precision(const ConfusionCounts& c);
Metric recall(const ConfusionCounts& c);
Metric f1(const ConfusionCounts& c);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr)
  double auroc = 0.0;
};

/// Threshold sweep over distinct scores, descending; tied scores collapse to
/// one operating point. Points start at (0,0) and end at (1,1); auroc is the
/// trapezoidal integral. Requires both classes.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

std::vector<int> predictions_from_scores(std::span<const double> scores, double threshold = 0.5);

/// CSV with header "fpr,tpr", LF endings, round-trip-exact decimals.
void export_curve(const RocCurve& curve, const std::filesystem::path& path);
RocCurve import_curve(const std::filesystem::path& path);

/// Single-line summary with percentages, two decimals.
std::string summary_line(const Metric& acc, const Metric& prec, const Metric& rec,
                         const Metric& f1v, double auroc);

}  // namespace evlab
