#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sparseseg/byte_io.hpp"
#include "sparseseg/sampler.hpp"
#include "sparseseg/volume.hpp"

namespace sparseseg {

struct SampleSpec {
  std::int64_t per_image_count = 100000;
  double balanced_fraction = 0.10;
  std::uint64_t rng_seed = 0;
};

struct LabeledPoint {
  Index3 voxel;
  std::uint16_t label;
};

/// Draws round(balanced_fraction * count) points split equally over the
/// classes present in the mask (remainder to the lowest labels) and the rest
/// uniformly over all voxels. Uniform points come first, then balanced points
/// in ascending class order.
///
/// The generator is std::mt19937_64 seeded with rng_seed; indices are drawn by
/// rejection from its raw 64-bit output, so the sequence does not depend on
/// the standard library's distribution implementations.
std::vector<LabeledPoint> sample_points(const Volume& v, const LabelMask& m, const SampleSpec& spec);

/// Unbiased integer in [0, n) from the raw engine output.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

using DescriptorRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ManifestEntry {
  std::string volume_id;
  Index3 voxel;
  std::uint16_t label;
};

struct DescriptorDataset {
  DescriptorRows rows;
  std::vector<std::uint16_t> labels;
  std::vector<ManifestEntry> manifest;

  int descriptor_dim() const { return static_cast<int>(rows.cols()); }
  std::int64_t count() const { return static_cast<std::int64_t>(labels.size()); }
};

DescriptorDataset build_dataset(const Volume& v, const LabelMask& m, const SampleSpec& spec,
                                const VoxelOffsetTable& table, const std::string& volume_id,
                                int threads = 0);

/// "ORGD": magic, u32 version 1, u32 dim, u64 count, then per row dim f32 and
/// a u16 label, all little-endian. The manifest is not part of the stream.
io::Bytes write_dataset(const DescriptorDataset& d);
DescriptorDataset read_dataset(io::ByteView bytes);

/// One line per row: "volume_id i j k label".
std::string write_manifest(const DescriptorDataset& d);
std::vector<ManifestEntry> parse_manifest(const std::string& text);

}  // namespace sparseseg
