#include "sparseseg/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace sparseseg {

void ConfusionCounts::add(int truth, int predicted) {
  if (truth < 0 || predicted < 0 || truth >= num_classes() || predicted >= num_classes())
    throw Error(ErrorCode::DimensionMismatch, "label outside the confusion matrix");
  ++matrix(truth, predicted);
}

ClassificationScores accuracy_and_macro_f1(const ConfusionCounts& counts) {
  const std::int64_t total = counts.total();
  if (total <= 0) throw Error(ErrorCode::EmptyCounts, "no evaluated items");
  ClassificationScores s;
  s.accuracy = static_cast<double>(counts.matrix.trace()) / static_cast<double>(total);
  const int n = counts.num_classes();
  s.per_class_f1.resize(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    const auto tp = static_cast<double>(counts.matrix(c, c));
    const auto predicted = static_cast<double>(counts.matrix.col(c).sum());
    const auto actual = static_cast<double>(counts.matrix.row(c).sum());
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    const double recall = actual > 0 ? tp / actual : 0.0;
    s.per_class_f1[static_cast<std::size_t>(c)] =
        precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  s.macro_f1 = mean(s.per_class_f1);
  return s;
}

ConfusionCounts confusion_from_masks(const LabelMask& pred, const LabelMask& truth,
                                     int num_classes) {
  if (pred.dims() != truth.dims())
    throw Error(ErrorCode::DimensionMismatch, "mask dimensions differ");
  if (num_classes <= 0) num_classes = std::max(pred.num_classes(), truth.num_classes());
  ConfusionCounts counts(num_classes);
  for (std::size_t i = 0; i < pred.size(); ++i) counts.add(truth.labels()[i], pred.labels()[i]);
  return counts;
}

std::vector<double> dice_per_class(const LabelMask& pred, const LabelMask& truth, int num_classes) {
  if (pred.dims() != truth.dims())
    throw Error(ErrorCode::DimensionMismatch, "mask dimensions differ");
  if (num_classes <= 0) num_classes = std::max(pred.num_classes(), truth.num_classes());
  std::vector<std::int64_t> in_pred(num_classes, 0), in_truth(num_classes, 0), both(num_classes, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = pred.labels()[i];
    const auto t = truth.labels()[i];
    if (p >= num_classes || t >= num_classes)
      throw Error(ErrorCode::DimensionMismatch, "label outside the class range");
    ++in_pred[p];
    ++in_truth[t];
    if (p == t) ++both[p];
  }
  std::vector<double> dice;
  for (int c = 1; c < num_classes; ++c) {
    const auto denom = in_pred[c] + in_truth[c];
    dice.push_back(denom == 0 ? 1.0 : 2.0 * static_cast<double>(both[c]) / static_cast<double>(denom));
  }
  return dice;
}

double mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace sparseseg
