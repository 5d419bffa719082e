#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "sparseseg/volume.hpp"

namespace sparseseg {

/// Rows are true labels, columns predicted labels.
struct ConfusionCounts {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> matrix;

  explicit ConfusionCounts(int num_classes)
      : matrix(Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(num_classes,
                                                                                 num_classes)) {}

  int num_classes() const { return static_cast<int>(matrix.rows()); }
  void add(int truth, int predicted);
  std::int64_t total() const { return matrix.sum(); }
};

struct ClassificationScores {
  double accuracy;
  double macro_f1;
  std::vector<double> per_class_f1;
};

/// Accuracy and the unweighted mean F1 over every class, background included.
/// A class with no true and no predicted items scores F1 = 0.
ClassificationScores accuracy_and_macro_f1(const ConfusionCounts& counts);

/// Dice for classes 1..num_classes-1 (index 0 of the result is class 1).
/// Both empty scores 1, exactly one empty scores 0.
std::vector<double> dice_per_class(const LabelMask& pred, const LabelMask& truth,
                                   int num_classes = 0);

double mean(const std::vector<double>& values);

ConfusionCounts confusion_from_masks(const LabelMask& pred, const LabelMask& truth,
                                     int num_classes = 0);

}  // namespace sparseseg
