#include "sparseseg/sampler.hpp"

#include <cmath>

namespace sparseseg {

OffsetTable build_offset_table() {
  OffsetTable t;
  t.offsets_mm.reserve(kDescriptorSize);
  int block = 0;

  const int half_plane = kPlaneExtent / 2;
  for (BlockKind kind : {BlockKind::PlaneAxial, BlockKind::PlaneCoronal, BlockKind::PlaneSagittal}) {
    const int first = static_cast<int>(t.offsets_mm.size());
    for (int b = -half_plane; b <= half_plane; ++b)
      for (int a = -half_plane; a <= half_plane; ++a) {
        const float u = a * kPlaneStepMm;
        const float w = b * kPlaneStepMm;
        switch (kind) {
          case BlockKind::PlaneAxial: t.offsets_mm.emplace_back(u, w, 0.0f); break;
          case BlockKind::PlaneCoronal: t.offsets_mm.emplace_back(u, 0.0f, w); break;
          default: t.offsets_mm.emplace_back(0.0f, u, w); break;
        }
      }
    t.blocks[block++] = {kind, kPlaneStepMm, kPlaneExtent, first,
                         static_cast<int>(t.offsets_mm.size()) - first};
  }

  const int half_cube = kCubeExtent / 2;
  for (float step : kCubeStepsMm) {
    const int first = static_cast<int>(t.offsets_mm.size());
    for (int z = -half_cube; z <= half_cube; ++z)
      for (int y = -half_cube; y <= half_cube; ++y)
        for (int x = -half_cube; x <= half_cube; ++x)
          t.offsets_mm.emplace_back(x * step, y * step, z * step);
    t.blocks[block++] = {BlockKind::Cube, step, kCubeExtent, first,
                         static_cast<int>(t.offsets_mm.size()) - first};
  }
  return t;
}

const OffsetTable& canonical_offset_table() {
  static const OffsetTable table = build_offset_table();
  return table;
}

VoxelOffsetTable bind_to_spacing(const OffsetTable& table, const Spacing3& spacing_mm) {
  for (int a = 0; a < 3; ++a)
    if (!(spacing_mm[a] > 0.0f) || !std::isfinite(spacing_mm[a]))
      throw Error(ErrorCode::NonPositiveSpacing, "spacing must be positive and finite");

  VoxelOffsetTable bound;
  bound.bound_spacing_mm = spacing_mm;
  bound.offsets_vox.reserve(table.offsets_mm.size());
  for (const auto& mm : table.offsets_mm) {
    Index3 v;
    for (int a = 0; a < 3; ++a)
      v[a] = static_cast<int>(std::lround(static_cast<double>(mm[a]) / spacing_mm[a]));
    bound.offsets_vox.push_back(v);
  }
  return bound;
}

bool spacing_matches(const Spacing3& a, const Spacing3& b) {
  for (int i = 0; i < 3; ++i) {
    const double x = a[i], y = b[i];
    if (std::fabs(x - y) > 1e-6 * std::max(std::fabs(x), std::fabs(y))) return false;
  }
  return true;
}

const std::vector<std::pair<int, int>>& decode_positions() {
  static const std::vector<std::pair<int, int>> positions = [] {
    std::vector<std::pair<int, int>> pos;
    pos.reserve(kDescriptorSize);
    const OffsetTable& t = canonical_offset_table();
    for (int b = 0; b < 9; ++b) {
      const int tile_row = (b / 3) * kPlaneExtent;
      const int tile_col = (b % 3) * kPlaneExtent;
      const BlockLayout& layout = t.blocks[b];
      for (int i = 0; i < layout.count; ++i) {
        if (layout.kind != BlockKind::Cube) {
          pos.emplace_back(tile_row + i / kPlaneExtent, tile_col + i % kPlaneExtent);
        } else {
          const int per_slice = kCubeExtent * kCubeExtent;
          const int slice = i / per_slice;
          const int within = i % per_slice;
          pos.emplace_back(tile_row + (slice / 3) * kCubeExtent + within / kCubeExtent,
                           tile_col + (slice % 3) * kCubeExtent + within % kCubeExtent);
        }
      }
    }
    return pos;
  }();
  return positions;
}

DecodedImage decode_descriptor(const Eigen::Ref<const Eigen::VectorXf>& values) {
  if (values.size() != kDescriptorSize)
    throw Error(ErrorCode::DimensionMismatch, "descriptor must have 6561 values");
  DecodedImage image(kDecodedSide, kDecodedSide);
  const auto& pos = decode_positions();
  for (int i = 0; i < kDescriptorSize; ++i) image(pos[i].first, pos[i].second) = values[i];
  return image;
}

}  // namespace sparseseg
