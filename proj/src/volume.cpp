#include "sparseseg/volume.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>

namespace sparseseg {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

struct GridHeader {
  Index3 dims;
  Spacing3 spacing;
};

GridHeader read_grid_header(io::Reader& r, std::string_view magic) {
  io::expect_magic(r, magic);
  r.require(4 + 12 + 12);
  const auto version = r.read<std::uint32_t>();
  if (version != kFormatVersion)
    throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(version));
  GridHeader h;
  for (int a = 0; a < 3; ++a) {
    const auto d = r.read<std::uint32_t>();
    if (d == 0 || d > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
      throw Error(ErrorCode::MalformedHeader, "invalid dimension");
    h.dims[a] = static_cast<int>(d);
  }
  for (int a = 0; a < 3; ++a) h.spacing[a] = r.read<float>();
  try {
    detail::check_spacing(h.spacing);
  } catch (const Error&) {
    throw Error(ErrorCode::MalformedHeader, "non-positive spacing in header");
  }
  return h;
}

void write_grid_header(io::Writer& w, std::string_view magic, const Index3& dims,
                       const Spacing3& spacing) {
  w.write_string(magic);
  w.write<std::uint32_t>(kFormatVersion);
  for (int a = 0; a < 3; ++a) w.write<std::uint32_t>(static_cast<std::uint32_t>(dims[a]));
  for (int a = 0; a < 3; ++a) w.write<float>(spacing[a]);
}

void expect_consumed(const io::Reader& r) {
  if (r.remaining() != 0) throw Error(ErrorCode::MalformedHeader, "trailing bytes after payload");
}

bool has_suffix(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool starts_with_magic(const io::Bytes& bytes, std::string_view magic) {
  return bytes.size() >= magic.size() &&
         std::equal(magic.begin(), magic.end(), bytes.begin(),
                    [](char c, std::byte b) { return static_cast<std::byte>(c) == b; });
}

void reject_gzip(const std::string& path) {
  if (has_suffix(path, ".gz"))
    throw Error(ErrorCode::UnsupportedDatatype,
                path + ": compressed input is not supported, decompress it first");
}

}  // namespace

// --- LabelMask -------------------------------------------------------------

LabelMask::LabelMask(Index3 dims, Spacing3 spacing_mm, std::vector<std::uint16_t> labels,
                     int num_classes)
    : dims_(dims), spacing_(spacing_mm), labels_(std::move(labels)), num_classes_(num_classes) {
  detail::check_dims(dims_);
  detail::check_spacing(spacing_);
  if (num_classes_ < 1 || num_classes_ > 65536)
    throw Error(ErrorCode::InvalidArgument, "num_classes out of range");
  if (labels_.size() != detail::voxel_count(dims_))
    throw Error(ErrorCode::DimensionMismatch, "label count does not match dims");
  for (auto l : labels_)
    if (l >= num_classes_)
      throw Error(ErrorCode::DimensionMismatch,
                  "label " + std::to_string(l) + " >= num_classes " + std::to_string(num_classes_));
}

LabelMask::LabelMask(Index3 dims, Spacing3 spacing_mm, std::uint16_t fill, int num_classes)
    : LabelMask(dims, spacing_mm,
                std::vector<std::uint16_t>((detail::check_dims(dims), detail::voxel_count(dims)),
                                           fill),
                num_classes) {}

std::uint16_t LabelMask::clamped_at(int i, int j, int k) const {
  i = std::clamp(i, 0, dims_.x() - 1);
  j = std::clamp(j, 0, dims_.y() - 1);
  k = std::clamp(k, 0, dims_.z() - 1);
  return at(i, j, k);
}

// --- phantoms --------------------------------------------------------------

Phantom synth_phantom(const PhantomSpec& spec, float background_intensity) {
  detail::check_dims(spec.dims);
  detail::check_spacing(spec.spacing_mm);
  const std::size_t n = detail::voxel_count(spec.dims);
  std::vector<float> intensities(n, background_intensity);
  std::vector<std::uint16_t> labels(n, 0);
  int max_label = 0;
  for (const auto& s : spec.shapes) max_label = std::max<int>(max_label, s.label);

  std::size_t idx = 0;
  for (int k = 0; k < spec.dims.z(); ++k)
    for (int j = 0; j < spec.dims.y(); ++j)
      for (int i = 0; i < spec.dims.x(); ++i, ++idx) {
        const Eigen::Vector3f pos =
            Eigen::Vector3f(float(i), float(j), float(k)).cwiseProduct(spec.spacing_mm);
        for (const auto& s : spec.shapes) {
          const Eigen::Vector3f d = pos - s.center_mm;
          const bool inside = s.kind == PhantomShape::Kind::Sphere
                                  ? d.squaredNorm() <= s.size_mm.x() * s.size_mm.x()
                                  : (d.cwiseAbs().array() <= s.size_mm.array()).all();
          if (inside) {
            intensities[idx] = s.intensity;
            labels[idx] = s.label;
          }
        }
      }

  return {Volume(spec.dims, spec.spacing_mm, std::move(intensities)),
          LabelMask(spec.dims, spec.spacing_mm, std::move(labels), max_label + 1)};
}

PhantomSpec standard_phantom(const std::string& name, int size, float spacing_mm) {
  PhantomSpec spec{Index3::Constant(size), Spacing3::Constant(spacing_mm), {}};
  const float extent = (size - 1) * spacing_mm;
  const Eigen::Vector3f center = Eigen::Vector3f::Constant(extent / 2);
  if (name == "sphere") {
    spec.shapes.push_back(PhantomShape::sphere(center, 0.24f * extent, 200.0f, 1));
  } else if (name == "nested") {
    spec.shapes.push_back(PhantomShape::sphere(center, 0.36f * extent, 60.0f, 1));
    spec.shapes.push_back(PhantomShape::sphere(center, 0.16f * extent, 300.0f, 2));
  } else if (name == "boxes") {
    spec.shapes.push_back(PhantomShape::box(center - Eigen::Vector3f(0.14f, 0.1f, 0.0f) * extent,
                                            Eigen::Vector3f(0.2f, 0.16f, 0.24f) * extent, 150.0f, 1));
    spec.shapes.push_back(PhantomShape::box(center + Eigen::Vector3f(0.14f, 0.1f, 0.02f) * extent,
                                            Eigen::Vector3f(0.18f, 0.2f, 0.16f) * extent, 400.0f, 2));
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown phantom '" + name + "'");
  }
  return spec;
}

// --- ORGV / ORGM -----------------------------------------------------------

Volume parse_raw(io::ByteView bytes) {
  io::Reader r(bytes);
  const auto h = read_grid_header(r, "ORGV");
  std::vector<float> data(detail::voxel_count(h.dims));
  r.read_floats(data.data(), data.size());
  expect_consumed(r);
  return Volume(h.dims, h.spacing, std::move(data));
}

io::Bytes write_raw(const Volume& v) {
  io::Writer w;
  w.reserve(28 + v.size() * sizeof(float));
  write_grid_header(w, "ORGV", v.dims(), v.spacing());
  w.write_floats(v.data().data(), v.size());
  return w.take();
}

LabelMask parse_mask(io::ByteView bytes) {
  io::Reader r(bytes);
  const auto h = read_grid_header(r, "ORGM");
  const std::size_t n = detail::voxel_count(h.dims);
  r.require(n * sizeof(std::uint16_t));
  std::vector<std::uint16_t> labels(n);
  int max_label = 0;
  for (auto& l : labels) {
    l = r.read<std::uint16_t>();
    max_label = std::max<int>(max_label, l);
  }
  expect_consumed(r);
  return LabelMask(h.dims, h.spacing, std::move(labels), std::max(2, max_label + 1));
}

io::Bytes write_mask(const LabelMask& m) {
  io::Writer w;
  w.reserve(28 + m.size() * sizeof(std::uint16_t));
  write_grid_header(w, "ORGM", m.dims(), m.spacing());
  for (auto l : m.labels()) w.write<std::uint16_t>(l);
  return w.take();
}

// --- files -----------------------------------------------------------------

io::Bytes io::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  io::Bytes bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error(ErrorCode::Io, "read failed: " + path);
  return bytes;
}

void io::write_file(const std::string& path, ByteView bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

Volume load_volume(const std::string& path) {
  reject_gzip(path);
  const auto bytes = io::read_file(path);
  if (starts_with_magic(bytes, "ORGV")) return parse_raw(bytes);
  if (has_suffix(path, ".nii") || bytes.size() >= 348) return parse_nifti(bytes).volume;
  throw Error(ErrorCode::MalformedHeader, path + ": unrecognised volume format");
}

LabelMask load_mask(const std::string& path) {
  reject_gzip(path);
  const auto bytes = io::read_file(path);
  if (starts_with_magic(bytes, "ORGM")) return parse_mask(bytes);
  if (has_suffix(path, ".nii") || bytes.size() >= 348) return nifti_to_mask(parse_nifti(bytes));
  throw Error(ErrorCode::MalformedHeader, path + ": unrecognised mask format");
}

}  // namespace sparseseg
