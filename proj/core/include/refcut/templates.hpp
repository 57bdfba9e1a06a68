#pragma once

#include <string_view>
#include <utility>
#include <vector>

#include "refcut/geometry.hpp"

namespace refcut {

enum class TemplateKind { circle, rectangle, triangle, polygon, sphere, cube };

TemplateKind parse_template_kind(std::string_view name);
std::string_view to_string(TemplateKind kind);

/// Basic object shape centred on the primary seed. All sizes are physical (mm).
class Template {
 public:
  TemplateKind kind() const { return kind_; }
  int ndim() const { return (kind_ == TemplateKind::sphere || kind_ == TemplateKind::cube) ? 3 : 2; }

  /// As given to make_template: diameter, per-axis extents, or flattened corner offsets.
  const std::vector<double>& size_params() const { return size_params_; }

  /// Corner offsets from the centre: rectangle (4), cube (8), triangle/polygon
  /// (recentred, counter-clockwise). Empty for circle and sphere.
  const std::vector<Vec3>& corner_points() const { return corners_; }

  /// Distance from the centre to the template boundary along unit direction `dir`.
  double boundary_distance(const Vec3& dir) const;

  friend bool operator==(const Template&, const Template&) = default;

 private:
  friend Template make_template(TemplateKind kind, std::vector<double> size_params);

  TemplateKind kind_ = TemplateKind::circle;
  std::vector<double> size_params_;
  std::vector<double> half_extents_;
  std::vector<Vec3> corners_;
};

/// size_params per kind: circle/sphere {diameter}; rectangle {w, h}; cube {x, y, z};
/// triangle/polygon {x0, y0, x1, y1, ...} corner offsets (triangle needs exactly 3).
/// Throws ValidationError on non-positive sizes or a polygon that is not a simple
/// loop strictly star-shaped about its vertex centroid.
Template make_template(TemplateKind kind, std::vector<double> size_params);

struct NodeIndex {
  int ray = 0;
  int depth = 0;

  friend bool operator==(const NodeIndex&, const NodeIndex&) = default;
};

/// Node lattice of rays cast from the seed. Node (r, k) sits at
/// seed + distance(r, k) * direction(r); k = 0 is nearest the seed.
struct RayGeometry {
  int ndim = 2;
  Vec3 seed{};
  int ray_count = 0;
  int nodes_per_ray = 0;
  /// Lat-long layout (3D only): ray r = row * longitudes + column.
  int latitudes = 0;
  int longitudes = 0;
  Template shape;
  std::vector<Vec3> directions;
  /// Template boundary distance per ray.
  std::vector<double> reach;
  /// Node distance from the seed, index r * nodes_per_ray + k.
  std::vector<double> distances;
  std::vector<Vec3> positions;
  /// Unordered neighbour pairs (a < b), sorted.
  std::vector<std::pair<int, int>> adjacency;

  std::size_t node_count() const { return positions.size(); }
  std::size_t flat(int ray, int depth) const {
    return static_cast<std::size_t>(ray) * static_cast<std::size_t>(nodes_per_ray) + static_cast<std::size_t>(depth);
  }
  const Vec3& position(int ray, int depth) const { return positions[flat(ray, depth)]; }
  double distance(int ray, int depth) const { return distances[flat(ray, depth)]; }
};

/// Fraction of the boundary distance at which node k = 0 is placed.
inline constexpr double kInnerOffsetFraction = 0.02;

inline constexpr int kMaxRays = 1'000'000;
inline constexpr int kMaxNodesPerRay = 4096;
inline constexpr std::size_t kMaxLatticeNodes = 4'000'000;

/// 2D: `rays` uniform angles 2*pi*r/R. 3D: `latitudes` x `rays` lat-long grid
/// (latitudes == 0 picks rays / 2). Throws ValidationError for bad counts or a
/// template whose dimensionality does not match the seed's.
RayGeometry generate_rays(const Template& shape, const Vec3& seed, int rays, int nodes_per_ray, int latitudes = 0);

/// Nearest lattice node to p (Euclidean, world mm). Ties resolve to the smaller
/// ray index, then the smaller depth.
NodeIndex closest_node(const RayGeometry& geom, const Vec3& p);

/// World positions of the template corners around the geometry's seed.
std::vector<Vec3> world_corners(const RayGeometry& geom);

}  // namespace refcut
