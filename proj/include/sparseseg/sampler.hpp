#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "sparseseg/volume.hpp"

namespace sparseseg {

// Normalisation applied to every raw sample.
inline constexpr float kIntensityScale = 128.0f;
inline constexpr float kDescriptorClip = 4.0f;

inline constexpr int kPlaneExtent = 27;       // -13..13
inline constexpr float kPlaneStepMm = 4.0f;
inline constexpr int kCubeExtent = 9;         // -4..4
inline constexpr std::array<float, 6> kCubeStepsMm = {2.0f, 3.0f, 5.0f, 12.0f, 28.0f, 64.0f};
inline constexpr int kDescriptorSize =
    3 * kPlaneExtent * kPlaneExtent + 6 * kCubeExtent * kCubeExtent * kCubeExtent;
inline constexpr int kDecodedSide = 81;

static_assert(kDescriptorSize == 6561);
static_assert(kDecodedSide * kDecodedSide == kDescriptorSize);

enum class BlockKind { PlaneAxial, PlaneCoronal, PlaneSagittal, Cube };

struct BlockLayout {
  BlockKind kind;
  float resolution_mm;
  int extent;  // samples per axis
  int first;   // index of the block's first offset in the table
  int count;
};

/// The fixed millimetre sampling pattern: three orthogonal 27x27 planes at
/// 4 mm followed by 9x9x9 cubes at 2, 3, 5, 12, 28 and 64 mm. Planes enumerate
/// their first in-plane axis fastest, cubes enumerate x fastest and z slowest.
struct OffsetTable {
  std::vector<Eigen::Vector3f> offsets_mm;
  std::array<BlockLayout, 9> blocks;
};

const OffsetTable& canonical_offset_table();
OffsetTable build_offset_table();

struct VoxelOffsetTable {
  std::vector<Index3> offsets_vox;
  Spacing3 bound_spacing_mm;
};

/// round(offset / spacing) per axis, ties away from zero.
VoxelOffsetTable bind_to_spacing(const OffsetTable& table, const Spacing3& spacing_mm);

struct Descriptor {
  Eigen::VectorXf values;
  Index3 origin_voxel = Index3::Zero();
};

bool spacing_matches(const Spacing3& a, const Spacing3& b);

inline float normalize_intensity(float raw) {
  if (std::isnan(raw)) return 0.0f;
  return std::clamp(raw / kIntensityScale, -kDescriptorClip, kDescriptorClip);
}

/// Fills `out` with the normalised intensities at `p + offset` for every
/// offset. Works with any volume-like type exposing `spacing()` and
/// `voxel_at(i, j, k)`; out-of-range lookups must yield 0.
template <typename VolumeLike, typename Derived>
void extract_descriptor_into(const VolumeLike& v, const Index3& p, const VoxelOffsetTable& table,
                             Eigen::MatrixBase<Derived> const& out_) {
  if (!spacing_matches(table.bound_spacing_mm, v.spacing()))
    throw Error(ErrorCode::SpacingMismatch, "offset table is bound to a different spacing");
  auto& out = const_cast<Eigen::MatrixBase<Derived>&>(out_);
  const auto n = static_cast<Eigen::Index>(table.offsets_vox.size());
  if (out.size() != n) throw Error(ErrorCode::DimensionMismatch, "descriptor buffer size");
  for (Eigen::Index i = 0; i < n; ++i) {
    const Index3 q = p + table.offsets_vox[static_cast<std::size_t>(i)];
    out(i) = normalize_intensity(static_cast<float>(v.voxel_at(q.x(), q.y(), q.z())));
  }
}

/// Dense-volume path: resolves every address and prefetches it before
/// reading, so the scattered lookups overlap instead of stalling one at a
/// time. Same values as the generic path.
template <typename Scalar, typename Derived>
void extract_descriptor_into(const BasicVolume<Scalar>& v, const Index3& p,
                             const VoxelOffsetTable& table, Eigen::MatrixBase<Derived> const& out_) {
  if (!spacing_matches(table.bound_spacing_mm, v.spacing()))
    throw Error(ErrorCode::SpacingMismatch, "offset table is bound to a different spacing");
  auto& out = const_cast<Eigen::MatrixBase<Derived>&>(out_);
  const std::size_t n = table.offsets_vox.size();
  if (static_cast<std::size_t>(out.size()) != n)
    throw Error(ErrorCode::DimensionMismatch, "descriptor buffer size");

  thread_local std::vector<std::ptrdiff_t> address;
  address.resize(n);
  const Scalar* data = v.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const Index3 q = p + table.offsets_vox[i];
    if (v.contains(q)) {
      address[i] = static_cast<std::ptrdiff_t>(v.linear_index(q.x(), q.y(), q.z()));
      __builtin_prefetch(data + address[i]);
    } else {
      address[i] = -1;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    out(static_cast<Eigen::Index>(i)) =
        normalize_intensity(address[i] < 0 ? 0.0f : static_cast<float>(data[address[i]]));
}

template <typename VolumeLike>
Descriptor extract_descriptor(const VolumeLike& v, const Index3& p, const VoxelOffsetTable& table) {
  Descriptor d{Eigen::VectorXf(static_cast<Eigen::Index>(table.offsets_vox.size())), p};
  extract_descriptor_into(v, p, table, d.values);
  return d;
}

using DecodedImage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Lays a canonical descriptor out as an 81x81 image: the three planes along
/// the top row of 27x27 tiles, then one tile per cube in resolution order,
/// each cube's nine z slices tiled 3x3.
DecodedImage decode_descriptor(const Eigen::Ref<const Eigen::VectorXf>& values);

/// (row, col) of every descriptor element in the decoded image.
const std::vector<std::pair<int, int>>& decode_positions();

}  // namespace sparseseg
