#include <cmath>

#include "sparseseg/volume.hpp"

namespace sparseseg {

namespace {

constexpr std::int32_t kHeaderSize = 348;
constexpr std::size_t kMinimumFileSize = 352;

enum NiftiType : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
};

std::size_t type_size(std::int16_t datatype) {
  switch (datatype) {
    case kUint8: return 1;
    case kInt16: return 2;
    case kInt32: return 4;
    case kFloat32: return 4;
    default:
      throw Error(ErrorCode::UnsupportedDatatype, "NIfTI datatype " + std::to_string(datatype));
  }
}

}  // namespace

NiftiImage parse_nifti(io::ByteView bytes) {
  if (bytes.size() < kMinimumFileSize)
    throw Error(ErrorCode::MalformedHeader, "file shorter than a NIfTI-1 header");

  // sizeof_hdr doubles as the byte-order probe.
  bool big_endian = false;
  if (io::Reader(bytes, false).read_at<std::int32_t>(0) != kHeaderSize) {
    if (io::Reader(bytes, true).read_at<std::int32_t>(0) != kHeaderSize)
      throw Error(ErrorCode::MalformedHeader, "sizeof_hdr is not 348");
    big_endian = true;
  }
  const io::Reader h(bytes, big_endian);

  const auto magic = reinterpret_cast<const char*>(bytes.data() + 344);
  if (!(magic[0] == 'n' && magic[1] == '+' && magic[2] == '1' && magic[3] == '\0'))
    throw Error(ErrorCode::MalformedHeader, "magic is not \"n+1\"");

  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = h.read_at<std::int16_t>(40 + 2 * i);
  const bool volume3d = dim[0] == 3;
  const bool volume4d_single = dim[0] == 4 && dim[4] == 1;
  if (!volume3d && !volume4d_single)
    throw Error(ErrorCode::UnsupportedDimensionality, "dim[0] = " + std::to_string(dim[0]));

  Index3 dims(dim[1], dim[2], dim[3]);
  if ((dims.array() <= 0).any()) throw Error(ErrorCode::MalformedHeader, "non-positive dim");

  const auto datatype = h.read_at<std::int16_t>(70);
  const std::size_t element = type_size(datatype);

  Spacing3 spacing;
  for (int a = 0; a < 3; ++a) spacing[a] = std::fabs(h.read_at<float>(76 + 4 * (a + 1)));
  try {
    detail::check_spacing(spacing);
  } catch (const Error&) {
    throw Error(ErrorCode::MalformedHeader, "pixdim must be positive");
  }

  const float vox_offset = h.read_at<float>(108);
  if (!std::isfinite(vox_offset) || vox_offset < 0.0f || vox_offset != std::floor(vox_offset))
    throw Error(ErrorCode::MalformedHeader, "invalid vox_offset");
  const auto offset = std::max<std::size_t>(static_cast<std::size_t>(vox_offset), kMinimumFileSize);

  const float slope = h.read_at<float>(112);
  const float inter = h.read_at<float>(116);
  const bool rescale = slope != 0.0f && std::isfinite(slope) && std::isfinite(inter);

  const std::size_t n = detail::voxel_count(dims);
  if (bytes.size() < offset || bytes.size() - offset < n * element)
    throw Error(ErrorCode::TruncatedData, "NIfTI payload shorter than dims imply");

  io::Reader payload(bytes, big_endian);
  payload.seek(offset);
  std::vector<float> values(n);
  std::optional<std::vector<std::int32_t>> integers;
  if (datatype != kFloat32) integers.emplace(n);

  for (std::size_t i = 0; i < n; ++i) {
    double raw = 0.0;
    switch (datatype) {
      case kUint8: raw = payload.read<std::uint8_t>(); break;
      case kInt16: raw = payload.read<std::int16_t>(); break;
      case kInt32: raw = payload.read<std::int32_t>(); break;
      case kFloat32: raw = payload.read<float>(); break;
    }
    if (integers) (*integers)[i] = static_cast<std::int32_t>(raw);
    values[i] = static_cast<float>(rescale ? raw * slope + inter : raw);
  }

  return {Volume(dims, spacing, std::move(values)), std::move(integers)};
}

LabelMask nifti_to_mask(const NiftiImage& image) {
  if (!image.integer_data)
    throw Error(ErrorCode::UnsupportedDatatype, "label masks must use an integer datatype");
  const auto& raw = *image.integer_data;
  std::vector<std::uint16_t> labels(raw.size());
  int max_label = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] < 0 || raw[i] > 65535)
      throw Error(ErrorCode::DimensionMismatch, "label value out of range");
    labels[i] = static_cast<std::uint16_t>(raw[i]);
    max_label = std::max<int>(max_label, raw[i]);
  }
  return LabelMask(image.volume.dims(), image.volume.spacing(), std::move(labels),
                   std::max(2, max_label + 1));
}

}  // namespace sparseseg
