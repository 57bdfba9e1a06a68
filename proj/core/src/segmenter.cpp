#include "refcut/segmenter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <string>

#include "refcut/error.hpp"

namespace refcut {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration<double, std::milli>(to - from).count();
}

FlowNetwork constrain(const LatticeNetwork& lattice, std::span<const RefinementSeed> refinements,
                      const RayGeometry& geom) {
  if (refinements.empty()) return lattice.network;
  std::vector<Arc> extra;
  std::set<std::pair<NodeId, NodeId>> removed_set;
  std::vector<ArcRef> removed;
  const auto& map = lattice.map;
  const auto inf = Capacity::infinite();
  for (const auto& seed : refinements) {
    const auto [r, k] = seed.snapped;
    if (r < 0 || r >= geom.ray_count || k < 0 || k >= geom.nodes_per_ray) {
      throw ValidationError("refinement seed '" + seed.id + "' is not snapped to a valid node");
    }
    for (int j = 0; j < geom.nodes_per_ray; ++j) {
      if (j <= k) {
        extra.push_back({kSource, map.id({r, j}), inf});
      } else {
        extra.push_back({map.id({r, j}), kSink, inf});
      }
    }
    if (k < geom.nodes_per_ray - 1) {
      const ArcRef intra{map.id({r, k + 1}), map.id({r, k})};
      if (removed_set.emplace(intra.from, intra.to).second) removed.push_back(intra);
    }
  }
  return rebuild_with(lattice.network, extra, removed);
}

std::vector<int> ray_distances(const RayGeometry& geom, const std::vector<std::vector<int>>& neighbours, int from) {
  std::vector<int> dist(static_cast<std::size_t>(geom.ray_count), -1);
  std::deque<int> queue{from};
  dist[static_cast<std::size_t>(from)] = 0;
  while (!queue.empty()) {
    const int r = queue.front();
    queue.pop_front();
    for (int s : neighbours[static_cast<std::size_t>(r)]) {
      if (dist[static_cast<std::size_t>(s)] < 0) {
        dist[static_cast<std::size_t>(s)] = dist[static_cast<std::size_t>(r)] + 1;
        queue.push_back(s);
      }
    }
  }
  return dist;
}

void validate_request(const SegmentationRequest& req) {
  if (!req.grid) throw ValidationError("segmentation request has no image");
  req.config.validate();
  const auto& g = req.grid->geometry();
  if (req.shape.ndim() != g.ndim) {
    throw ValidationError("template '" + std::string(to_string(req.shape.kind())) + "' is " +
                          std::to_string(req.shape.ndim()) + "D but the image is " + std::to_string(g.ndim) + "D");
  }
  for (int a = 0; a < g.ndim; ++a) {
    const double lo = g.origin[a] - 0.5 * g.spacing[a];
    const double hi = g.origin[a] + (static_cast<double>(g.dims[a]) - 0.5) * g.spacing[a];
    const double p = req.primary_seed[a];
    if (!(p >= lo && p <= hi)) throw ValidationError("primary seed lies outside the image bounds");
  }
  for (const auto& seed : req.refinements) {
    for (int a = 0; a < g.ndim; ++a) {
      if (!std::isfinite(seed.position[a])) throw ValidationError("refinement seed '" + seed.id + "' is not finite");
    }
  }
}

}  // namespace

void check_refinement_consistency(const RayGeometry& geom, std::span<const RefinementSeed> refinements, int delta) {
  if (refinements.size() < 2) return;
  std::vector<std::vector<int>> neighbours(static_cast<std::size_t>(geom.ray_count));
  for (const auto& [a, b] : geom.adjacency) {
    neighbours[static_cast<std::size_t>(a)].push_back(b);
    neighbours[static_cast<std::size_t>(b)].push_back(a);
  }
  std::vector<std::string> ids;
  std::string detail;
  const auto note = [&](const std::string& id) {
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  };
  for (std::size_t i = 0; i < refinements.size(); ++i) {
    const auto& a = refinements[i];
    const auto dist = ray_distances(geom, neighbours, a.snapped.ray);
    for (std::size_t j = i + 1; j < refinements.size(); ++j) {
      const auto& b = refinements[j];
      const int d = dist[static_cast<std::size_t>(b.snapped.ray)];
      if (d < 0) continue;
      const long long allowed = static_cast<long long>(delta) * d;
      if (std::abs(a.snapped.depth - b.snapped.depth) > allowed) {
        note(a.id);
        note(b.id);
        detail += (detail.empty() ? "" : "; ") + a.id + " (ray " + std::to_string(a.snapped.ray) + ", depth " +
                  std::to_string(a.snapped.depth) + ") vs " + b.id + " (ray " + std::to_string(b.snapped.ray) +
                  ", depth " + std::to_string(b.snapped.depth) + ")";
      }
    }
  }
  if (!ids.empty()) {
    throw InfeasibleRefinementError("conflicting refinement seeds: " + detail, std::move(ids));
  }
}

LatticeSolution solve_lattice(const RayGeometry& geom, const CostField& cost, const BuildConfig& cfg,
                              std::span<const RefinementSeed> refinements, Solver solver) {
  const auto lattice = assemble_network(geom, cost, cfg);
  const auto net = constrain(lattice, refinements, geom);
  auto labels = max_flow(net, solver);
  auto boundary = extract_boundary(labels, geom, lattice.map);
  return {std::move(boundary), std::move(labels)};
}

std::vector<int> extract_boundary(const CutLabels& labels, const RayGeometry& geom, const NodeMap& map) {
  std::vector<int> boundary(static_cast<std::size_t>(geom.ray_count), 0);
  for (int r = 0; r < geom.ray_count; ++r) {
    for (int k = geom.nodes_per_ray - 1; k >= 0; --k) {
      if (labels.side[static_cast<std::size_t>(map.id({r, k}))] == Side::source) {
        boundary[static_cast<std::size_t>(r)] = k;
        break;
      }
    }
  }
  return boundary;
}

Contour boundary_to_contour(std::span<const int> boundary, const RayGeometry& geom) {
  if (boundary.size() != static_cast<std::size_t>(geom.ray_count)) {
    throw ValidationError("boundary length does not match the ray count");
  }
  Contour c;
  c.vertices.reserve(boundary.size() + 2);
  for (int r = 0; r < geom.ray_count; ++r) c.vertices.push_back(geom.position(r, boundary[static_cast<std::size_t>(r)]));
  if (geom.ndim == 2) return c;

  const int lat = geom.latitudes;
  const int lon = geom.longitudes;
  const auto pole = [&](int row, double sign) {
    double sum = 0.0;
    for (int j = 0; j < lon; ++j) {
      const int r = row * lon + j;
      sum += geom.distance(r, boundary[static_cast<std::size_t>(r)]);
    }
    return geom.seed + Vec3{0.0, 0.0, sign} * (sum / lon);
  };
  const int top = static_cast<int>(c.vertices.size());
  c.vertices.push_back(pole(0, 1.0));
  const int bottom = static_cast<int>(c.vertices.size());
  c.vertices.push_back(pole(lat - 1, -1.0));

  const auto at = [&](int i, int j) { return i * lon + (j % lon); };
  for (int j = 0; j < lon; ++j) {
    c.triangles.push_back({top, at(0, j), at(0, j + 1)});
    c.triangles.push_back({bottom, at(lat - 1, j + 1), at(lat - 1, j)});
  }
  for (int i = 0; i + 1 < lat; ++i) {
    for (int j = 0; j < lon; ++j) {
      c.triangles.push_back({at(i, j), at(i + 1, j), at(i, j + 1)});
      c.triangles.push_back({at(i, j + 1), at(i + 1, j), at(i + 1, j + 1)});
    }
  }
  return c;
}

Mask contour_to_mask(const Contour& contour, const RayGeometry& geom, const GridGeometry& grid) {
  if (contour.vertices.size() < static_cast<std::size_t>(geom.ray_count)) {
    throw ValidationError("contour does not carry one vertex per ray");
  }
  Mask mask(grid);
  std::vector<double> radius(static_cast<std::size_t>(geom.ray_count));
  double reach = 0.0;
  for (int r = 0; r < geom.ray_count; ++r) {
    radius[static_cast<std::size_t>(r)] = distance(contour.vertices[static_cast<std::size_t>(r)], geom.seed);
    reach = std::max(reach, radius[static_cast<std::size_t>(r)]);
  }

  std::array<std::size_t, 3> lo{0, 0, 0};
  std::array<std::size_t, 3> hi{0, 0, 0};
  for (int a = 0; a < grid.ndim; ++a) {
    const double last = static_cast<double>(grid.dims[a] - 1);
    const double from = std::ceil((geom.seed[a] - reach - grid.origin[a]) / grid.spacing[a]);
    const double to = std::floor((geom.seed[a] + reach - grid.origin[a]) / grid.spacing[a]);
    if (to < 0.0 || from > last) return mask;
    lo[a] = static_cast<std::size_t>(std::max(from, 0.0));
    hi[a] = static_cast<std::size_t>(std::min(to, last));
  }

  if (geom.ndim == 2) {
    const double per_ray = 2.0 * kPi / geom.ray_count;
    for (std::size_t j = lo[1]; j <= hi[1]; ++j) {
      for (std::size_t i = lo[0]; i <= hi[0]; ++i) {
        const auto d = grid.voxel_center(i, j) - geom.seed;
        const double dist = std::hypot(d.x, d.y);
        double angle = std::atan2(d.y, d.x);
        if (angle < 0.0) angle += 2.0 * kPi;
        const double u = angle / per_ray;
        const double fl = std::floor(u);
        const int r0 = static_cast<int>(fl) % geom.ray_count;
        const int r1 = (r0 + 1) % geom.ray_count;
        const double f = u - fl;
        const double rho = (1.0 - f) * radius[static_cast<std::size_t>(r0)] + f * radius[static_cast<std::size_t>(r1)];
        if (dist <= rho) mask.labels[grid.index(i, j)] = 1;
      }
    }
    return mask;
  }

  const int lat = geom.latitudes;
  const int lon = geom.longitudes;
  const double row_step = kPi / lat;
  const double col_step = 2.0 * kPi / lon;
  const auto pole_radius = [&](int row) {
    double sum = 0.0;
    for (int j = 0; j < lon; ++j) sum += radius[static_cast<std::size_t>(row * lon + j)];
    return sum / lon;
  };
  const double top = pole_radius(0);
  const double bottom = pole_radius(lat - 1);
  const auto row_radius = [&](int row, int c0, int c1, double f) {
    return (1.0 - f) * radius[static_cast<std::size_t>(row * lon + c0)] + f * radius[static_cast<std::size_t>(row * lon + c1)];
  };
  for (std::size_t k = lo[2]; k <= hi[2]; ++k) {
    for (std::size_t j = lo[1]; j <= hi[1]; ++j) {
      for (std::size_t i = lo[0]; i <= hi[0]; ++i) {
        const auto d = grid.voxel_center(i, j, k) - geom.seed;
        const double dist = norm(d);
        if (dist == 0.0) {
          mask.labels[grid.index(i, j, k)] = 1;
          continue;
        }
        const double polar = std::acos(std::clamp(d.z / dist, -1.0, 1.0));
        double azimuth = std::atan2(d.y, d.x);
        if (azimuth < 0.0) azimuth += 2.0 * kPi;
        const double u = azimuth / col_step;
        const double fu = std::floor(u);
        const int c0 = static_cast<int>(fu) % lon;
        const int c1 = (c0 + 1) % lon;
        const double fc = u - fu;
        const double v = polar / row_step - 0.5;
        double rho = 0.0;
        if (v <= 0.0) {
          const double t = polar / (0.5 * row_step);
          rho = (1.0 - t) * top + t * row_radius(0, c0, c1, fc);
        } else if (v >= lat - 1) {
          const double t = (kPi - polar) / (0.5 * row_step);
          rho = (1.0 - t) * bottom + t * row_radius(lat - 1, c0, c1, fc);
        } else {
          const double fv = std::floor(v);
          const int row = static_cast<int>(fv);
          const double fr = v - fv;
          rho = (1.0 - fr) * row_radius(row, c0, c1, fc) + fr * row_radius(row + 1, c0, c1, fc);
        }
        if (dist <= rho) mask.labels[grid.index(i, j, k)] = 1;
      }
    }
  }
  return mask;
}

Template default_template(const GridGeometry& g) {
  double extent = std::numeric_limits<double>::infinity();
  for (int a = 0; a < g.ndim; ++a) extent = std::min(extent, static_cast<double>(g.dims[a]) * g.spacing[a]);
  return make_template(g.ndim == 3 ? TemplateKind::sphere : TemplateKind::circle, {0.5 * extent});
}

SegmentationResult segment(const SegmentationRequest& req) {
  validate_request(req);
  const auto& grid = *req.grid;
  const auto& cfg = req.config;
  SegmentationResult result;

  const auto t0 = Clock::now();
  const auto geom = generate_rays(req.shape, req.primary_seed, cfg.rays, cfg.nodes_per_ray, cfg.latitudes);
  const auto t1 = Clock::now();

  auto refinements = req.refinements;
  snap_refinements(geom, refinements);
  const double mu = estimate_mean(grid, req.primary_seed, refinements, cfg);
  const auto cost = compute_costs(grid, geom, mu);
  const auto t2 = Clock::now();

  check_refinement_consistency(geom, refinements, cfg.delta);
  const auto lattice = assemble_network(geom, cost, cfg);
  const auto net = constrain(lattice, refinements, geom);
  const auto t3 = Clock::now();

  CutLabels labels;
  try {
    labels = max_flow(net, req.solver);
  } catch (const InfeasibleCutError& e) {
    std::vector<std::string> ids;
    for (const auto& s : refinements) ids.push_back(s.id);
    throw InfeasibleRefinementError(std::string("refinement seeds over-constrain the cut: ") + e.what(), std::move(ids));
  }
  const auto t4 = Clock::now();

  result.boundary = extract_boundary(labels, geom, lattice.map);
  result.contour = boundary_to_contour(result.boundary, geom);
  result.mask = contour_to_mask(result.contour, geom, grid.geometry());
  const auto t5 = Clock::now();

  result.flow_value = labels.flow_value;
  result.mu = mu;
  for (const auto& s : refinements) result.snapped_refinements.push_back(s.snapped);
  result.template_corners = world_corners(geom);
  result.timing = {elapsed_ms(t0, t1), elapsed_ms(t1, t2), elapsed_ms(t2, t3),
                   elapsed_ms(t3, t4), elapsed_ms(t4, t5), elapsed_ms(t0, t5)};
  return result;
}

}  // namespace refcut
