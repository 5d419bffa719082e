#include "sparseseg/dataset.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <sstream>

#include <omp.h>

namespace sparseseg {

namespace {

constexpr std::uint32_t kVersion = 1;

}  // namespace

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty range");
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

std::vector<LabeledPoint> sample_points(const Volume& v, const LabelMask& m,
                                        const SampleSpec& spec) {
  if (!same_grid(v, m)) throw Error(ErrorCode::DimensionMismatch, "mask does not match volume");
  if (m.size() == 0) throw Error(ErrorCode::EmptyMask, "mask has no voxels");
  if (spec.per_image_count <= 0)
    throw Error(ErrorCode::InvalidArgument, "per_image_count must be positive");
  if (!(spec.balanced_fraction >= 0.0 && spec.balanced_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "balanced_fraction must lie in [0, 1]");

  const auto balanced = static_cast<std::int64_t>(
      std::llround(spec.balanced_fraction * static_cast<double>(spec.per_image_count)));
  const std::int64_t uniform = spec.per_image_count - balanced;

  const Index3& dims = m.dims();
  const auto to_point = [&](std::uint64_t idx) {
    const auto x = static_cast<int>(idx % dims.x());
    const auto y = static_cast<int>((idx / dims.x()) % dims.y());
    const auto z = static_cast<int>(idx / (std::uint64_t(dims.x()) * dims.y()));
    return Index3(x, y, z);
  };

  std::mt19937_64 rng(spec.rng_seed);
  std::vector<LabeledPoint> points;
  points.reserve(static_cast<std::size_t>(spec.per_image_count));
  for (std::int64_t i = 0; i < uniform; ++i) {
    const auto idx = uniform_index(rng, m.size());
    points.push_back({to_point(idx), m.labels()[idx]});
  }

  if (balanced > 0) {
    std::map<std::uint16_t, std::vector<std::uint32_t>> by_class;
    for (std::size_t i = 0; i < m.size(); ++i)
      by_class[m.labels()[i]].push_back(static_cast<std::uint32_t>(i));
    const auto present = static_cast<std::int64_t>(by_class.size());
    const std::int64_t share = balanced / present;
    std::int64_t remainder = balanced % present;
    for (const auto& [label, voxels] : by_class) {
      const std::int64_t take = share + (remainder > 0 ? 1 : 0);
      if (remainder > 0) --remainder;
      for (std::int64_t i = 0; i < take; ++i) {
        const auto idx = voxels[uniform_index(rng, voxels.size())];
        points.push_back({to_point(idx), label});
      }
    }
  }
  return points;
}

DescriptorDataset build_dataset(const Volume& v, const LabelMask& m, const SampleSpec& spec,
                                const VoxelOffsetTable& table, const std::string& volume_id,
                                int threads) {
  if (!spacing_matches(table.bound_spacing_mm, v.spacing()))
    throw Error(ErrorCode::SpacingMismatch, "offset table is bound to a different spacing");
  const auto points = sample_points(v, m, spec);
  const auto n = static_cast<std::int64_t>(points.size());

  DescriptorDataset d;
  d.rows.resize(n, static_cast<Eigen::Index>(table.offsets_vox.size()));
  d.labels.reserve(points.size());
  d.manifest.reserve(points.size());
  for (const auto& p : points) {
    d.labels.push_back(p.label);
    d.manifest.push_back({volume_id, p.voxel, p.label});
  }

  std::exception_ptr failure;
#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : omp_get_max_threads())
  for (std::int64_t r = 0; r < n; ++r) {
    try {
      extract_descriptor_into(v, points[static_cast<std::size_t>(r)].voxel, table, d.rows.row(r).transpose());
    } catch (...) {
#pragma omp critical(sparseseg_dataset_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return d;
}

io::Bytes write_dataset(const DescriptorDataset& d) {
  if (static_cast<std::int64_t>(d.rows.rows()) != d.count())
    throw Error(ErrorCode::DimensionMismatch, "row and label counts differ");
  io::Writer w;
  w.reserve(20 + static_cast<std::size_t>(d.rows.size()) * 4 + d.labels.size() * 2);
  w.write_string("ORGD");
  w.write<std::uint32_t>(kVersion);
  w.write<std::uint32_t>(static_cast<std::uint32_t>(d.rows.cols()));
  w.write<std::uint64_t>(static_cast<std::uint64_t>(d.count()));
  for (Eigen::Index r = 0; r < d.rows.rows(); ++r) {
    w.write_floats(d.rows.row(r).data(), static_cast<std::size_t>(d.rows.cols()));
    w.write<std::uint16_t>(d.labels[static_cast<std::size_t>(r)]);
  }
  return w.take();
}

DescriptorDataset read_dataset(io::ByteView bytes) {
  io::Reader r(bytes);
  io::expect_magic(r, "ORGD");
  r.require(4 + 4 + 8);
  const auto version = r.read<std::uint32_t>();
  if (version != kVersion)
    throw Error(ErrorCode::UnsupportedVersion, "ORGD version " + std::to_string(version));
  const std::uint64_t dim = r.read<std::uint32_t>();
  const std::uint64_t count = r.read<std::uint64_t>();
  const std::uint64_t row_bytes = dim * sizeof(float) + sizeof(std::uint16_t);
  if (count > r.remaining() / row_bytes)
    throw Error(ErrorCode::TruncatedData, "fewer rows than the header declares");
  if (r.remaining() != count * row_bytes)
    throw Error(ErrorCode::MalformedHeader, "trailing bytes after rows");

  DescriptorDataset d;
  d.rows.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  d.labels.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    r.read_floats(d.rows.row(static_cast<Eigen::Index>(i)).data(), dim);
    d.labels[i] = r.read<std::uint16_t>();
  }
  return d;
}

std::string write_manifest(const DescriptorDataset& d) {
  std::ostringstream out;
  for (const auto& e : d.manifest)
    out << e.volume_id << ' ' << e.voxel.x() << ' ' << e.voxel.y() << ' ' << e.voxel.z() << ' '
        << e.label << '\n';
  return out.str();
}

std::vector<ManifestEntry> parse_manifest(const std::string& text) {
  std::vector<ManifestEntry> entries;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    ManifestEntry e;
    int label = -1;
    if (!(fields >> e.volume_id >> e.voxel.x() >> e.voxel.y() >> e.voxel.z() >> label) ||
        label < 0 || label > 65535)
      throw Error(ErrorCode::MalformedHeader, "bad manifest line: " + line);
    e.label = static_cast<std::uint16_t>(label);
    entries.push_back(e);
  }
  return entries;
}

}  // namespace sparseseg
