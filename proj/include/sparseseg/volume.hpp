#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sparseseg/byte_io.hpp"
#include "sparseseg/error.hpp"

namespace sparseseg {

using Index3 = Eigen::Vector3i;
using Spacing3 = Eigen::Vector3f;

namespace detail {

inline void check_dims(const Index3& dims) {
  if ((dims.array() <= 0).any())
    throw Error(ErrorCode::DimensionMismatch, "volume dimensions must be positive");
}

inline void check_spacing(const Spacing3& spacing) {
  for (int a = 0; a < 3; ++a)
    if (!(spacing[a] > 0.0f) || !std::isfinite(spacing[a]))
      throw Error(ErrorCode::NonPositiveSpacing, "spacing must be positive and finite");
}

inline std::size_t voxel_count(const Index3& dims) {
  return static_cast<std::size_t>(dims.x()) * static_cast<std::size_t>(dims.y()) *
         static_cast<std::size_t>(dims.z());
}

}  // namespace detail

/// Dense 3D intensity grid, x fastest, with physical voxel spacing in mm.
/// Reads outside the grid return 0.
template <typename Scalar>
class BasicVolume {
public:
  using value_type = Scalar;

  BasicVolume(Index3 dims, Spacing3 spacing_mm, std::vector<Scalar> intensities)
      : dims_(dims), spacing_(spacing_mm), data_(std::move(intensities)) {
    detail::check_dims(dims_);
    detail::check_spacing(spacing_);
    if (data_.size() != detail::voxel_count(dims_))
      throw Error(ErrorCode::DimensionMismatch, "intensity count does not match dims");
  }

  BasicVolume(Index3 dims, Spacing3 spacing_mm, Scalar fill = Scalar(0))
      : BasicVolume(dims, spacing_mm, std::vector<Scalar>(detail::voxel_count(dims), fill)) {}

  const Index3& dims() const { return dims_; }
  const Spacing3& spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }
  const std::vector<Scalar>& data() const { return data_; }

  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_.x() && j < dims_.y() && k < dims_.z();
  }
  bool contains(const Index3& p) const { return contains(p.x(), p.y(), p.z()); }

  std::size_t linear_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_.y() + j) * dims_.x() + i;
  }

  Scalar voxel_at(int i, int j, int k) const {
    return contains(i, j, k) ? data_[linear_index(i, j, k)] : Scalar(0);
  }
  Scalar voxel_at(const Index3& p) const { return voxel_at(p.x(), p.y(), p.z()); }

  template <typename Other>
  BasicVolume<Other> cast() const {
    return BasicVolume<Other>(dims_, spacing_, std::vector<Other>(data_.begin(), data_.end()));
  }

private:
  Index3 dims_;
  Spacing3 spacing_;
  std::vector<Scalar> data_;
};

using Volume = BasicVolume<float>;

/// Per-voxel organ labels sharing a volume's grid. Label 0 is background.
class LabelMask {
public:
  LabelMask(Index3 dims, Spacing3 spacing_mm, std::vector<std::uint16_t> labels, int num_classes);
  LabelMask(Index3 dims, Spacing3 spacing_mm, std::uint16_t fill, int num_classes);

  const Index3& dims() const { return dims_; }
  const Spacing3& spacing() const { return spacing_; }
  int num_classes() const { return num_classes_; }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::uint16_t>& labels() const { return labels_; }

  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_.x() && j < dims_.y() && k < dims_.z();
  }
  std::size_t linear_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_.y() + j) * dims_.x() + i;
  }
  std::uint16_t at(int i, int j, int k) const { return labels_[linear_index(i, j, k)]; }
  std::uint16_t at(const Index3& p) const { return at(p.x(), p.y(), p.z()); }

  /// Label at the nearest in-bounds voxel.
  std::uint16_t clamped_at(int i, int j, int k) const;

  bool operator==(const LabelMask&) const = default;

private:
  Index3 dims_;
  Spacing3 spacing_;
  std::vector<std::uint16_t> labels_;
  int num_classes_;
};

template <typename Scalar>
bool same_grid(const BasicVolume<Scalar>& v, const LabelMask& m) {
  return v.dims() == m.dims();
}

// --- synthetic phantoms ---------------------------------------------------

struct PhantomShape {
  enum class Kind { Sphere, Box };
  Kind kind = Kind::Sphere;
  Eigen::Vector3f center_mm = Eigen::Vector3f::Zero();
  /// Sphere: x component is the radius. Box: half extents per axis.
  Eigen::Vector3f size_mm = Eigen::Vector3f::Zero();
  float intensity = 0.0f;
  std::uint16_t label = 1;

  static PhantomShape sphere(Eigen::Vector3f center, float radius, float intensity,
                             std::uint16_t label) {
    return {Kind::Sphere, center, Eigen::Vector3f::Constant(radius), intensity, label};
  }
  static PhantomShape box(Eigen::Vector3f center, Eigen::Vector3f half_extents, float intensity,
                          std::uint16_t label) {
    return {Kind::Box, center, half_extents, intensity, label};
  }
};

struct PhantomSpec {
  Index3 dims;
  Spacing3 spacing_mm;
  std::vector<PhantomShape> shapes;
};

struct Phantom {
  Volume volume;
  LabelMask mask;
};

/// Voxel (i,j,k) sits at (i,j,k)*spacing mm. Later shapes overwrite earlier ones.
Phantom synth_phantom(const PhantomSpec& spec, float background_intensity);

/// Named test phantoms on a cubic grid: "sphere", "nested" (two concentric
/// spheres) and "boxes" (two overlapping boxes). Geometry scales with the
/// grid's physical extent.
PhantomSpec standard_phantom(const std::string& name, int size, float spacing_mm);
inline constexpr float kPhantomBackground = -100.0f;

// --- file formats ----------------------------------------------------------

/// "ORGV": magic, u32 version 1, 3×u32 dims, 3×f32 spacing, f32 payload (LE).
Volume parse_raw(io::ByteView bytes);
io::Bytes write_raw(const Volume& v);

/// "ORGM": same header as ORGV with a u16 label payload. num_classes is
/// recovered as max label + 1 (at least 2).
LabelMask parse_mask(io::ByteView bytes);
io::Bytes write_mask(const LabelMask& m);

struct NiftiImage {
  Volume volume;
  /// Raw stored values when the datatype is an integer type, before scaling.
  std::optional<std::vector<std::int32_t>> integer_data;
};

/// Single-file NIfTI-1 (.nii). Orientation fields are ignored.
NiftiImage parse_nifti(io::ByteView bytes);

/// Interpret integer NIfTI data as a label mask.
LabelMask nifti_to_mask(const NiftiImage& image);

Volume load_volume(const std::string& path);
LabelMask load_mask(const std::string& path);

}  // namespace sparseseg
