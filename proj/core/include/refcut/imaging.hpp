#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refcut/geometry.hpp"

namespace refcut {

/// Voxel lattice layout shared by images and masks. Unused axes have extent 1,
/// spacing 1 and origin 0. Voxel (i,j,k) has its centre at origin + (i,j,k)*spacing.
struct GridGeometry {
  int ndim = 2;
  std::array<std::size_t, 3> dims{1, 1, 1};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};

  std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k = 0) const {
    return i + dims[0] * (j + dims[1] * k);
  }

  Vec3 voxel_center(std::size_t i, std::size_t j, std::size_t k = 0) const {
    return {origin[0] + static_cast<double>(i) * spacing[0],
            origin[1] + static_cast<double>(j) * spacing[1],
            origin[2] + static_cast<double>(k) * spacing[2]};
  }

  /// Throws ValidationError unless ndim is 2 or 3, extents >= 1 and spacing > 0.
  void validate() const;

  bool same_lattice(const GridGeometry& other) const {
    return ndim == other.ndim && dims == other.dims;
  }

  static GridGeometry make(std::vector<std::size_t> dims, std::vector<double> spacing = {},
                           std::vector<double> origin = {});
};

/// Immutable 2D/3D scalar field, x-fastest storage.
class ScalarGrid {
 public:
  ScalarGrid(GridGeometry geometry, std::vector<double> values);

  const GridGeometry& geometry() const { return geometry_; }
  int ndim() const { return geometry_.ndim; }
  std::span<const double> values() const { return values_; }
  double at(std::size_t i, std::size_t j, std::size_t k = 0) const {
    return values_[geometry_.index(i, j, k)];
  }

 private:
  GridGeometry geometry_;
  std::vector<double> values_;
};

/// Binary label volume; a nonzero label is foreground.
struct Mask {
  GridGeometry geometry;
  std::vector<std::uint8_t> labels;

  Mask() = default;
  explicit Mask(GridGeometry g) : geometry(g), labels(g.voxel_count(), 0) {}

  std::size_t count() const;

  /// Equality is over the lattice extents and labels; spacing is metadata.
  friend bool operator==(const Mask& a, const Mask& b) {
    return a.geometry.same_lattice(b.geometry) && a.labels == b.labels;
  }
};

enum class ImageFormat { pgm, png, mhd };

ImageFormat parse_image_format(std::string_view name);
std::string_view to_string(ImageFormat format);
/// Guesses from the extension (.pgm, .png, .mhd); throws ValidationError otherwise.
ImageFormat format_from_path(const std::filesystem::path& path);

ScalarGrid load_grid(const std::filesystem::path& path, ImageFormat format);
ScalarGrid load_grid(const std::filesystem::path& path);

/// In-memory decoders used by file loading and by the session service.
ScalarGrid decode_pgm(std::span<const std::uint8_t> bytes);
ScalarGrid decode_png(std::span<const std::uint8_t> bytes);
/// `resolve_data` maps the ElementDataFile name to the raw payload bytes.
ScalarGrid decode_mhd(std::string_view header,
                      const std::function<std::vector<std::uint8_t>(const std::string&)>& resolve_data);

Mask load_mask(const std::filesystem::path& path);
void save_mask(const Mask& mask, const std::filesystem::path& path, ImageFormat format);

/// Writes intensities: PGM as 8-bit if every value is an integer in [0,255],
/// otherwise 16-bit rounded and clamped; MHD as MET_FLOAT.
void save_grid(const ScalarGrid& grid, const std::filesystem::path& path, ImageFormat format);

/// Grayscale 8-bit PNG encoding of a row-major width x height buffer.
std::vector<std::uint8_t> encode_png_gray8(std::span<const std::uint8_t> pixels, std::size_t width,
                                           std::size_t height);

/// Bilinear/trilinear interpolation in world coordinates; outside points are
/// clamped to the grid's bounding box first.
double sample_at(const ScalarGrid& grid, const Vec3& p);

enum class PhantomKind { disc, sphere, rectangle, box };

PhantomKind parse_phantom_kind(std::string_view name);

struct PhantomSpec {
  PhantomKind kind = PhantomKind::disc;
  Vec3 center{};
  /// Radius (disc/sphere, first entry used) or half extent per axis (rectangle/box), mm.
  std::vector<double> radius_or_halfextent{20.0};
  double fg_intensity = 200.0;
  double bg_intensity = 50.0;
  double noise_sigma = 0.0;
  std::vector<std::size_t> dims{64, 64};
  std::vector<double> spacing{1.0, 1.0};
};

struct Phantom {
  ScalarGrid grid;
  Mask truth;
};

/// Deterministic for a given (spec, rng_seed). Intensities are clamped at zero.
Phantom make_phantom(const PhantomSpec& spec, std::uint64_t rng_seed);

}  // namespace refcut
