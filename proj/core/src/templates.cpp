#include "refcut/templates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "refcut/error.hpp"

namespace refcut {

namespace {

double cross2(const Vec3& a, const Vec3& b) { return a.x * b.y - a.y * b.x; }

std::vector<Vec3> polygon_corners(const std::vector<double>& flat) {
  if (flat.size() % 2 != 0) throw ValidationError("polygon corners must be x,y pairs");
  std::vector<Vec3> corners;
  for (std::size_t i = 0; i < flat.size(); i += 2) corners.push_back({flat[i], flat[i + 1], 0.0});
  if (corners.size() < 3) throw ValidationError("polygon needs at least 3 corners");

  Vec3 centroid{};
  for (const auto& c : corners) centroid = centroid + c;
  centroid = centroid * (1.0 / static_cast<double>(corners.size()));
  double scale = 0.0;
  for (auto& c : corners) {
    c = c - centroid;
    scale = std::max(scale, norm(c));
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("polygon corners are degenerate");

  // Strictly star-shaped about the centre <=> every edge turns the same way
  // around it and the edges sweep exactly one full turn.
  const auto n = corners.size();
  int positive = 0;
  double sweep = 0.0;
  const double eps = 1e-12 * scale * scale;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = corners[i];
    const auto& b = corners[(i + 1) % n];
    const double c = cross2(a, b);
    if (std::abs(c) <= eps) {
      throw ValidationError("polygon is not star-shaped about its centre (edge " + std::to_string(i) +
                            " is collinear with the centre)");
    }
    positive += c > 0 ? 1 : 0;
    sweep += std::atan2(c, a.x * b.x + a.y * b.y);
  }
  if (positive != 0 && positive != static_cast<int>(n)) {
    throw ValidationError("polygon is self-intersecting or not star-shaped about its centre");
  }
  if (std::abs(std::abs(sweep) - 2.0 * kPi) > 1e-6) {
    throw ValidationError("polygon winds more than once around its centre");
  }
  if (positive == 0) std::reverse(corners.begin(), corners.end());
  return corners;
}

}  // namespace

TemplateKind parse_template_kind(std::string_view name) {
  if (name == "circle") return TemplateKind::circle;
  if (name == "rectangle" || name == "square") return TemplateKind::rectangle;
  if (name == "triangle") return TemplateKind::triangle;
  if (name == "polygon") return TemplateKind::polygon;
  if (name == "sphere") return TemplateKind::sphere;
  if (name == "cube") return TemplateKind::cube;
  throw ValidationError("unknown template kind '" + std::string(name) + "'");
}

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::circle: return "circle";
    case TemplateKind::rectangle: return "rectangle";
    case TemplateKind::triangle: return "triangle";
    case TemplateKind::polygon: return "polygon";
    case TemplateKind::sphere: return "sphere";
    case TemplateKind::cube: return "cube";
  }
  return "?";
}

Template make_template(TemplateKind kind, std::vector<double> size_params) {
  Template t;
  t.kind_ = kind;
  const auto require_count = [&](std::size_t n, const char* what) {
    if (size_params.size() != n) {
      throw ValidationError(std::string(what) + " template takes " + std::to_string(n) + " size parameter(s)");
    }
    for (double v : size_params) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("template extents must be positive");
    }
  };
  switch (kind) {
    case TemplateKind::circle:
    case TemplateKind::sphere:
      require_count(1, kind == TemplateKind::circle ? "circle" : "sphere");
      t.half_extents_ = {size_params[0] / 2.0};
      break;
    case TemplateKind::rectangle: {
      require_count(2, "rectangle");
      const double hx = size_params[0] / 2.0;
      const double hy = size_params[1] / 2.0;
      t.half_extents_ = {hx, hy};
      t.corners_ = {{hx, hy, 0}, {-hx, hy, 0}, {-hx, -hy, 0}, {hx, -hy, 0}};
      break;
    }
    case TemplateKind::cube: {
      require_count(3, "cube");
      t.half_extents_ = {size_params[0] / 2.0, size_params[1] / 2.0, size_params[2] / 2.0};
      for (int c = 0; c < 8; ++c) {
        t.corners_.push_back({(c & 1 ? -1.0 : 1.0) * t.half_extents_[0], (c & 2 ? -1.0 : 1.0) * t.half_extents_[1],
                              (c & 4 ? -1.0 : 1.0) * t.half_extents_[2]});
      }
      break;
    }
    case TemplateKind::triangle:
    case TemplateKind::polygon:
      if (kind == TemplateKind::triangle && size_params.size() != 6) {
        throw ValidationError("triangle template takes 3 corner offsets (6 values)");
      }
      for (double v : size_params) {
        if (!std::isfinite(v)) throw ValidationError("polygon corner offsets must be finite");
      }
      t.corners_ = polygon_corners(size_params);
      break;
  }
  t.size_params_ = std::move(size_params);
  return t;
}

double Template::boundary_distance(const Vec3& dir) const {
  switch (kind_) {
    case TemplateKind::circle:
    case TemplateKind::sphere:
      return half_extents_[0];
    case TemplateKind::rectangle:
    case TemplateKind::cube: {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < half_extents_.size(); ++a) {
        const double d = std::abs(dir[static_cast<int>(a)]);
        if (d > 1e-15) best = std::min(best, half_extents_[a] / d);
      }
      return best;
    }
    case TemplateKind::triangle:
    case TemplateKind::polygon: {
      double best = std::numeric_limits<double>::infinity();
      const auto n = corners_.size();
      for (std::size_t i = 0; i < n; ++i) {
        const auto& a = corners_[i];
        const auto e = corners_[(i + 1) % n] - a;
        const double denom = cross2(dir, e);
        if (std::abs(denom) < 1e-15) continue;
        const double t = cross2(a, e) / denom;
        const double s = cross2(a, dir) / denom;
        if (t > 0.0 && s >= -1e-9 && s <= 1.0 + 1e-9) best = std::min(best, t);
      }
      return best;
    }
  }
  return 0.0;
}

RayGeometry generate_rays(const Template& shape, const Vec3& seed, int rays, int nodes_per_ray, int latitudes) {
  if (nodes_per_ray < 2 || nodes_per_ray > kMaxNodesPerRay) {
    throw ValidationError("nodes per ray must be in [2, " + std::to_string(kMaxNodesPerRay) + "]");
  }
  if (rays < 3 || rays > kMaxRays) {
    throw ValidationError("ray count must be in [3, " + std::to_string(kMaxRays) + "]");
  }
  RayGeometry g;
  g.ndim = shape.ndim();
  g.seed = g.ndim == 2 ? Vec3{seed.x, seed.y, 0.0} : seed;
  g.shape = shape;
  g.nodes_per_ray = nodes_per_ray;

  if (g.ndim == 2) {
    g.ray_count = rays;
    g.directions.reserve(static_cast<std::size_t>(rays));
    for (int r = 0; r < rays; ++r) {
      const double angle = 2.0 * kPi * static_cast<double>(r) / static_cast<double>(rays);
      g.directions.push_back({std::cos(angle), std::sin(angle), 0.0});
    }
    for (int r = 0; r < rays; ++r) {
      const int s = (r + 1) % rays;
      g.adjacency.emplace_back(std::min(r, s), std::max(r, s));
    }
    std::sort(g.adjacency.begin(), g.adjacency.end());
  } else {
    const int lat = latitudes > 0 ? latitudes : std::max(2, rays / 2);
    if (lat < 2) throw ValidationError("3D lattice needs at least 2 latitude rows");
    g.latitudes = lat;
    g.longitudes = rays;
    const auto total = static_cast<long long>(lat) * rays;
    if (total > kMaxRays) throw ValidationError("3D ray count exceeds the limit");
    g.ray_count = static_cast<int>(total);
    for (int i = 0; i < lat; ++i) {
      const double polar = kPi * (static_cast<double>(i) + 0.5) / static_cast<double>(lat);
      for (int j = 0; j < rays; ++j) {
        const double azimuth = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(rays);
        g.directions.push_back(
            {std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth), std::cos(polar)});
      }
    }
    std::set<std::pair<int, int>> pairs;
    const auto link = [&](int a, int b) {
      if (a != b) pairs.emplace(std::min(a, b), std::max(a, b));
    };
    for (int i = 0; i < lat; ++i) {
      for (int j = 0; j < rays; ++j) {
        const int r = i * rays + j;
        link(r, i * rays + (j + 1) % rays);
        if (i + 1 < lat) link(r, (i + 1) * rays + j);
      }
    }
    // Pole rows: all rays of the row are neighbours through the pole.
    for (int row : {0, lat - 1}) {
      for (int a = 0; a < rays; ++a) {
        for (int b = a + 1; b < rays; ++b) link(row * rays + a, row * rays + b);
      }
    }
    g.adjacency.assign(pairs.begin(), pairs.end());
  }

  if (static_cast<std::size_t>(g.ray_count) * static_cast<std::size_t>(nodes_per_ray) > kMaxLatticeNodes) {
    throw ValidationError("lattice exceeds " + std::to_string(kMaxLatticeNodes) + " nodes");
  }

  const auto n = static_cast<std::size_t>(nodes_per_ray);
  g.reach.resize(static_cast<std::size_t>(g.ray_count));
  g.distances.resize(static_cast<std::size_t>(g.ray_count) * n);
  g.positions.resize(g.distances.size());
  for (int r = 0; r < g.ray_count; ++r) {
    const auto& dir = g.directions[static_cast<std::size_t>(r)];
    const double reach = shape.boundary_distance(dir);
    if (!(reach > 0.0) || !std::isfinite(reach)) {
      throw ValidationError("template boundary is not reachable along ray " + std::to_string(r));
    }
    g.reach[static_cast<std::size_t>(r)] = reach;
    const double inner = kInnerOffsetFraction * reach;
    for (int k = 0; k < nodes_per_ray; ++k) {
      const double t = k == nodes_per_ray - 1
                           ? reach
                           : inner + (reach - inner) * static_cast<double>(k) / static_cast<double>(nodes_per_ray - 1);
      const auto idx = g.flat(r, k);
      g.distances[idx] = t;
      g.positions[idx] = g.seed + dir * t;
    }
  }
  return g;
}

NodeIndex closest_node(const RayGeometry& geom, const Vec3& p) {
  const Vec3 q = geom.ndim == 2 ? Vec3{p.x, p.y, 0.0} : p;
  NodeIndex best{0, 0};
  const auto d0 = geom.position(0, 0) - q;
  double best_d2 = dot(d0, d0);
  for (int r = 0; r < geom.ray_count; ++r) {
    for (int k = 0; k < geom.nodes_per_ray; ++k) {
      const auto d = geom.position(r, k) - q;
      const double d2 = dot(d, d);
      // Scan order already favours (smaller ray, smaller depth); only a clearly
      // shorter distance may displace the incumbent.
      if (d2 < best_d2 - 1e-12 * (1.0 + best_d2)) {
        best_d2 = d2;
        best = {r, k};
      }
    }
  }
  return best;
}

std::vector<Vec3> world_corners(const RayGeometry& geom) {
  std::vector<Vec3> out;
  for (const auto& c : geom.shape.corner_points()) out.push_back(geom.seed + c);
  return out;
}

}  // namespace refcut
