#include "sparseseg/segmenter.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <exception>

#include <omp.h>

namespace sparseseg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int resolve_threads(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

/// Regular grid of anchor points i*stride covering the volume.
struct Grid {
  Index3 stride;
  Index3 counts;

  Grid(const Index3& dims, const Index3& s) : stride(s) {
    for (int a = 0; a < 3; ++a) counts[a] = (dims[a] + s[a] - 1) / s[a];
  }
  std::int64_t size() const { return std::int64_t(counts.x()) * counts.y() * counts.z(); }
  Index3 point(std::int64_t g) const {
    const auto x = static_cast<int>(g % counts.x());
    const auto y = static_cast<int>((g / counts.x()) % counts.y());
    const auto z = static_cast<int>(g / (std::int64_t(counts.x()) * counts.y()));
    return Index3(x, y, z).cwiseProduct(stride);
  }
  std::int64_t cell_of(int i, int j, int k) const {
    return (std::int64_t(k / stride.z()) * counts.y() + j / stride.y()) * counts.x() + i / stride.x();
  }
};

/// Runs body(i) for i in [0, n) across threads; rethrows the first failure.
template <typename Body>
void parallel_for(std::int64_t n, int threads, Body&& body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64) num_threads(resolve_threads(threads))
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(sparseseg_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

LabelMask block_fill(const Volume& v, const Grid& grid, const std::vector<std::uint16_t>& labels,
                     int num_classes, int threads) {
  const Index3& dims = v.dims();
  std::vector<std::uint16_t> out(v.size());
  parallel_for(dims.z(), threads, [&](std::int64_t kk) {
    const int k = static_cast<int>(kk);
    for (int j = 0; j < dims.y(); ++j)
      for (int i = 0; i < dims.x(); ++i)
        out[v.linear_index(i, j, k)] = labels[static_cast<std::size_t>(grid.cell_of(i, j, k))];
  });
  return LabelMask(dims, v.spacing(), std::move(out), num_classes);
}

}  // namespace

ModelPointClassifier::ModelPointClassifier(const ModelWeights& weights, const Spacing3& spacing_mm)
    : weights_(weights), offsets_(bind_to_spacing(canonical_offset_table(), spacing_mm)) {
  weights_.validate();
  if (weights_.input_dim() != static_cast<int>(offsets_.offsets_vox.size()))
    throw Error(ErrorCode::DimensionMismatch,
                "model input width " + std::to_string(weights_.input_dim()) +
                    " does not match the 6561-value descriptor");
}

ClassProbabilities ModelPointClassifier::predict(const Volume& v, const Index3& p) const {
  thread_local Eigen::VectorXf buffer;
  buffer.resize(static_cast<Eigen::Index>(offsets_.offsets_vox.size()));
  extract_descriptor_into(v, p, offsets_, buffer);
  return sparseseg::predict(weights_, buffer);
}

std::uint16_t ModelPointClassifier::classify(const Volume& v, const Index3& p) const {
  return static_cast<std::uint16_t>(predict(v, p).argmax_label);
}

GridLevel make_level(float spacing_mm, const Spacing3& volume_spacing) {
  if (!(spacing_mm > 0.0f) || !std::isfinite(spacing_mm))
    throw Error(ErrorCode::InvalidArgument, "grid spacing must be positive");
  GridLevel level;
  level.spacing_mm = spacing_mm;
  for (int a = 0; a < 3; ++a)
    level.stride[a] =
        std::max(1, static_cast<int>(std::lround(double(spacing_mm) / volume_spacing[a])));
  return level;
}

std::int64_t SegmentationStats::classifier_calls() const {
  std::int64_t n = 0;
  for (const auto& l : levels) n += l.classifier_calls;
  return n;
}

std::int64_t SegmentationStats::smoothed_assignments() const {
  std::int64_t n = 0;
  for (const auto& l : levels) n += l.smoothed;
  return n;
}

std::int64_t SegmentationStats::grid_points() const {
  std::int64_t n = 0;
  for (const auto& l : levels) n += l.grid_points;
  return n;
}

double SegmentationStats::seconds() const {
  double s = 0.0;
  for (const auto& l : levels) s += l.seconds;
  return s;
}

SegmentationResult coarse_segment(const Volume& v, const PointClassifier& c,
                                  const GridLevel& level, int threads) {
  const auto start = Clock::now();
  const Grid grid(v.dims(), level.stride);
  std::vector<std::uint16_t> labels(static_cast<std::size_t>(grid.size()));
  parallel_for(grid.size(), threads, [&](std::int64_t g) {
    labels[static_cast<std::size_t>(g)] = c.classify(v, grid.point(g));
  });

  LevelStats stats;
  stats.spacing_mm = level.spacing_mm;
  stats.stride = level.stride;
  stats.grid_points = grid.size();
  stats.classifier_calls = grid.size();
  auto mask = block_fill(v, grid, labels, c.num_classes(), threads);
  stats.seconds = seconds_since(start);
  return {std::move(mask), {{stats}}, {}};
}

SegmentationResult refine_level(const Volume& v, const PointClassifier& c,
                                const LabelMask& previous, const GridLevel& level,
                                const RefineOptions& options) {
  if (previous.dims() != v.dims())
    throw Error(ErrorCode::DimensionMismatch, "previous mask does not match the volume grid");
  if (options.majority_threshold < 1 || options.majority_threshold > 27)
    throw Error(ErrorCode::InvalidArgument, "majority threshold must lie in [1, 27]");

  const auto start = Clock::now();
  const Grid grid(v.dims(), level.stride);
  const auto n = static_cast<std::size_t>(grid.size());
  std::vector<std::uint16_t> labels(n);

  enum Decision : std::uint8_t { kUnanimous, kSmoothed, kQuery };
  std::vector<std::uint8_t> decision(n);

  parallel_for(grid.size(), options.threads, [&](std::int64_t g) {
    const Index3 p = grid.point(g);
    std::array<std::uint16_t, 27> seen{};
    std::array<int, 27> counts{};
    int distinct = 0;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const std::uint16_t l = previous.clamped_at(p.x() + dx * level.stride.x(),
                                                      p.y() + dy * level.stride.y(),
                                                      p.z() + dz * level.stride.z());
          int slot = 0;
          while (slot < distinct && seen[slot] != l) ++slot;
          if (slot == distinct) seen[distinct++] = l;
          ++counts[slot];
        }

    const auto gi = static_cast<std::size_t>(g);
    if (distinct == 1) {
      labels[gi] = seen[0];
      decision[gi] = kUnanimous;
      return;
    }
    int best = 0;
    for (int s = 1; s < distinct; ++s)
      if (counts[s] > counts[best]) best = s;
    if (counts[best] >= options.majority_threshold) {
      labels[gi] = seen[best];
      decision[gi] = kSmoothed;
    } else {
      decision[gi] = kQuery;
    }
  });

  std::vector<std::int64_t> queue;
  LevelStats stats;
  for (std::size_t g = 0; g < n; ++g) {
    switch (decision[g]) {
      case kUnanimous: ++stats.unanimous; break;
      case kSmoothed: ++stats.smoothed; break;
      default: queue.push_back(static_cast<std::int64_t>(g)); break;
    }
  }

  parallel_for(static_cast<std::int64_t>(queue.size()), options.threads, [&](std::int64_t q) {
    const auto g = queue[static_cast<std::size_t>(q)];
    labels[static_cast<std::size_t>(g)] = c.classify(v, grid.point(g));
  });

  stats.spacing_mm = level.spacing_mm;
  stats.stride = level.stride;
  stats.grid_points = grid.size();
  stats.classifier_calls = static_cast<std::int64_t>(queue.size());

  SegmentationResult result{
      block_fill(v, grid, labels, std::max(previous.num_classes(), c.num_classes()),
                 options.threads),
      {}, {}};
  if (options.record_queries) {
    result.queried_points.reserve(queue.size());
    for (auto g : queue) result.queried_points.push_back(grid.point(g));
  }
  stats.seconds = seconds_since(start);
  result.stats.levels.push_back(stats);
  return result;
}

SegmentationResult segment(const Volume& v, const PointClassifier& c,
                           const SegmentOptions& options) {
  if (options.levels_mm.empty()) throw Error(ErrorCode::InvalidArgument, "no grid levels given");
  for (std::size_t i = 1; i < options.levels_mm.size(); ++i)
    if (!(options.levels_mm[i] < options.levels_mm[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "grid levels must be strictly decreasing");

  auto result = coarse_segment(v, c, make_level(options.levels_mm[0], v.spacing()), options.threads);
  RefineOptions refine;
  refine.majority_threshold = options.majority_threshold;
  refine.threads = options.threads;
  for (std::size_t i = 1; i < options.levels_mm.size(); ++i) {
    auto next = refine_level(v, c, result.mask, make_level(options.levels_mm[i], v.spacing()), refine);
    result.mask = std::move(next.mask);
    result.stats.levels.push_back(next.stats.levels.front());
  }
  return result;
}

LabelMask brute_force_segment(const Volume& v, const PointClassifier& c, int threads) {
  std::vector<std::uint16_t> labels(v.size());
  const Index3& dims = v.dims();
  parallel_for(dims.z(), threads, [&](std::int64_t kk) {
    const int k = static_cast<int>(kk);
    for (int j = 0; j < dims.y(); ++j)
      for (int i = 0; i < dims.x(); ++i)
        labels[v.linear_index(i, j, k)] = c.classify(v, Index3(i, j, k));
  });
  return LabelMask(dims, v.spacing(), std::move(labels), c.num_classes());
}

}  // namespace sparseseg
