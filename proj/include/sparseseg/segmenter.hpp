#pragma once

#include <cstdint>
#include <vector>

#include "sparseseg/model.hpp"
#include "sparseseg/sampler.hpp"
#include "sparseseg/volume.hpp"

namespace sparseseg {

/// Labels one voxel of a volume. Implementations must be pure and safe to
/// call from many threads at once.
class PointClassifier {
public:
  virtual ~PointClassifier() = default;
  virtual std::uint16_t classify(const Volume& v, const Index3& p) const = 0;
  virtual int num_classes() const = 0;
};

/// Descriptor extraction followed by the residual network.
class ModelPointClassifier final : public PointClassifier {
public:
  ModelPointClassifier(const ModelWeights& weights, const Spacing3& spacing_mm);

  std::uint16_t classify(const Volume& v, const Index3& p) const override;
  ClassProbabilities predict(const Volume& v, const Index3& p) const;
  int num_classes() const override { return weights_.num_classes(); }

  const VoxelOffsetTable& offsets() const { return offsets_; }

private:
  ModelWeights weights_;
  VoxelOffsetTable offsets_;
};

/// Reads the answer from a reference mask.
class GroundTruthClassifier final : public PointClassifier {
public:
  explicit GroundTruthClassifier(const LabelMask& truth) : truth_(truth) {}
  std::uint16_t classify(const Volume&, const Index3& p) const override { return truth_.at(p); }
  int num_classes() const override { return truth_.num_classes(); }

private:
  const LabelMask& truth_;
};

struct GridLevel {
  float spacing_mm = 0.0f;
  Index3 stride = Index3::Ones();
};

/// stride = max(1, round(spacing_mm / voxel spacing)) per axis.
GridLevel make_level(float spacing_mm, const Spacing3& volume_spacing);

struct LevelStats {
  float spacing_mm = 0.0f;
  Index3 stride = Index3::Ones();
  std::int64_t grid_points = 0;
  std::int64_t unanimous = 0;
  std::int64_t smoothed = 0;
  std::int64_t classifier_calls = 0;
  double seconds = 0.0;
};

struct SegmentationStats {
  std::vector<LevelStats> levels;

  std::int64_t classifier_calls() const;
  std::int64_t smoothed_assignments() const;
  std::int64_t grid_points() const;
  double seconds() const;
};

struct RefineOptions {
  /// Minimum count of one label among the 27 neighbours that settles a point
  /// without a classifier call. 27 means only unanimous points are skipped.
  int majority_threshold = 20;
  /// 0 keeps the OpenMP default.
  int threads = 0;
  /// Collect the grid points sent to the classifier.
  bool record_queries = false;
};

struct SegmentOptions {
  std::vector<float> levels_mm{8.0f, 4.0f, 2.0f};
  int majority_threshold = 20;
  int threads = 0;
};

struct SegmentationResult {
  LabelMask mask;
  SegmentationStats stats;
  std::vector<Index3> queried_points;
};

/// Classifies every grid point of `level` and fills each stride-sized cell
/// anchored at a grid point with that point's label.
SegmentationResult coarse_segment(const Volume& v, const PointClassifier& c,
                                  const GridLevel& level, int threads = 0);

/// One refinement pass over the finer grid of `level`, reading the 3x3x3
/// neighbourhood (at the level's stride) from `previous`.
SegmentationResult refine_level(const Volume& v, const PointClassifier& c,
                                const LabelMask& previous, const GridLevel& level,
                                const RefineOptions& options = {});

/// Coarse pass at levels_mm[0] followed by refinement at every later level.
SegmentationResult segment(const Volume& v, const PointClassifier& c,
                           const SegmentOptions& options = {});

/// Classifier at every voxel.
LabelMask brute_force_segment(const Volume& v, const PointClassifier& c, int threads = 0);

}  // namespace sparseseg
