#include "evlab/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace evlab {

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size())
    throw ValidationError("confusion: " + std::to_string(labels.size()) + " labels vs " +
                          std::to_string(predictions.size()) + " predictions");
  if (labels.empty()) throw ValidationError("confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if ((labels[i] & ~1) || (predictions[i] & ~1))
      throw ValidationError("confusion: values must be 0 or 1, got " +
                            std::to_string(labels[i] & ~1 ? labels[i] : predictions[i]) +
                            " at index " + std::to_string(i));
    const bool truth = labels[i] != 0;
    const bool pred = predictions[i] != 0;
    if (truth && pred) ++c.tp;
    else if (!truth && pred) ++c.fp;
    else if (truth && !pred) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {

Metric ratio(std::size_t num, std::size_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

Metric accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }
Metric precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
Metric recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }

Metric f1(const ConfusionCounts& c) {
  const Metric p = precision(c);
  const Metric r = recall(c);
  if (p.degenerate || r.degenerate || p.value + r.value == 0.0) return {0.0, true};
  return {2.0 * p.value * r.value / (p.value + r.value), false};
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ValidationError("roc_curve: score/label count mismatch");
  if (scores.empty()) throw ValidationError("roc_curve: empty input");
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0 ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0)
    throw ValidationError("roc_curve: only one class present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] != 0) ++tp;
      else ++fp;
      ++i;
    }
    curve.points.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                              static_cast<double>(tp) / static_cast<double>(pos));
  }

  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& [x0, y0] = curve.points[k - 1];
    const auto& [x1, y1] = curve.points[k];
    curve.auroc += (x1 - x0) * (y0 + y1) * 0.5;
  }
  return curve;
}

std::vector<int> predictions_from_scores(std::span<const double> scores, double threshold) {
  std::vector<int> preds(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) preds[i] = scores[i] >= threshold ? 1 : 0;
  return preds;
}

void export_curve(const RocCurve& curve, const std::filesystem::path& path) {
  if (path.empty()) throw ValidationError("export_curve: empty path");
  std::string out = "fpr,tpr\n";
  char buf[64];
  for (const auto& [fpr, tpr] : curve.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", fpr, tpr);
    out += buf;
  }
  write_file_atomic(path, out);
}

RocCurve import_curve(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  if (!std::getline(in, line) || line != "fpr,tpr")
    throw DecodeError("roc csv: missing fpr,tpr header in " + path.string());
  RocCurve curve;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DecodeError("roc csv: line " + std::to_string(lineno) + " has no comma");
    try {
      curve.points.emplace_back(std::stod(line.substr(0, comma)),
                                std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw DecodeError("roc csv: line " + std::to_string(lineno) + " is not numeric");
    }
  }
  if (curve.points.size() < 2)
    throw ValidationError("roc csv: need at least 2 points, got " +
                          std::to_string(curve.points.size()) + " in " + path.string());
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& [x0, y0] = curve.points[k - 1];
    const auto& [x1, y1] = curve.points[k];
    curve.auroc += (x1 - x0) * (y0 + y1) * 0.5;
  }
  return curve;
}

std::string summary_line(const Metric& acc, const Metric& prec, const Metric& rec,
                         const Metric& f1v, double auroc) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "accuracy=%.2f precision=%.2f recall=%.2f f1=%.2f auroc=%.2f",
                acc.value * 100.0, prec.value * 100.0, rec.value * 100.0, f1v.value * 100.0,
                auroc * 100.0);
  return buf;
}

}  // namespace evlab
