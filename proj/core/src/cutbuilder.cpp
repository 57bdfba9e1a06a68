#include "refcut/cutbuilder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "refcut/error.hpp"

namespace refcut {

void BuildConfig::validate() const {
  if (nodes_per_ray < 2) throw ValidationError("nodes_per_ray must be >= 2");
  if (rays < 3) throw ValidationError("rays must be >= 3");
  if (delta < 0 || delta > nodes_per_ray - 1) {
    throw ValidationError("delta must be in [0, nodes_per_ray - 1], got " + std::to_string(delta));
  }
  if (latitudes < 0) throw ValidationError("latitudes must be >= 0");
  if (!(mean_radius_mm > 0.0) || !std::isfinite(mean_radius_mm)) {
    throw ValidationError("mean_radius_mm must be positive");
  }
}

namespace {

void collect_ball(const GridGeometry& g, const Vec3& center, double radius, std::vector<std::size_t>& out) {
  std::array<std::size_t, 3> lo{0, 0, 0};
  std::array<std::size_t, 3> hi{0, 0, 0};
  for (int a = 0; a < g.ndim; ++a) {
    const double last = static_cast<double>(g.dims[a] - 1);
    const double from = std::ceil((center[a] - radius - g.origin[a]) / g.spacing[a]);
    const double to = std::floor((center[a] + radius - g.origin[a]) / g.spacing[a]);
    if (to < 0.0 || from > last) return;
    lo[a] = static_cast<std::size_t>(std::max(from, 0.0));
    hi[a] = static_cast<std::size_t>(std::min(to, last));
  }
  const double r2 = radius * radius;
  for (std::size_t k = lo[2]; k <= hi[2]; ++k) {
    for (std::size_t j = lo[1]; j <= hi[1]; ++j) {
      for (std::size_t i = lo[0]; i <= hi[0]; ++i) {
        auto d = g.voxel_center(i, j, k) - center;
        if (g.ndim == 2) d.z = 0.0;
        if (dot(d, d) <= r2) out.push_back(g.index(i, j, k));
      }
    }
  }
}

}  // namespace

double estimate_mean(const ScalarGrid& grid, const Vec3& primary, std::span<const RefinementSeed> refinements,
                     const BuildConfig& cfg) {
  if (!(cfg.mean_radius_mm > 0.0)) throw ValidationError("mean_radius_mm must be positive");
  std::vector<std::size_t> voxels;
  collect_ball(grid.geometry(), primary, cfg.mean_radius_mm, voxels);
  if (cfg.include_refinement_in_mean && !refinements.empty()) {
    for (const auto& seed : refinements) collect_ball(grid.geometry(), seed.position, cfg.mean_radius_mm, voxels);
    std::sort(voxels.begin(), voxels.end());
    voxels.erase(std::unique(voxels.begin(), voxels.end()), voxels.end());
  }
  if (voxels.empty()) return sample_at(grid, primary);
  double sum = 0.0;
  const auto values = grid.values();
  for (auto v : voxels) sum += values[v];
  return sum / static_cast<double>(voxels.size());
}

CostField compute_costs(const ScalarGrid& grid, const RayGeometry& geom, double mu) {
  CostField field;
  field.rays = geom.ray_count;
  field.nodes = geom.nodes_per_ray;
  field.mu = mu;
  const auto n = static_cast<std::size_t>(geom.nodes_per_ray);
  const auto stride = n + 1;
  field.deviation.resize(static_cast<std::size_t>(geom.ray_count) * stride);
  double peak = 0.0;
  for (int r = 0; r < geom.ray_count; ++r) {
    const auto base = static_cast<std::size_t>(r) * stride;
    for (int k = 0; k < geom.nodes_per_ray; ++k) {
      field.deviation[base + static_cast<std::size_t>(k)] = std::abs(sample_at(grid, geom.position(r, k)) - mu);
    }
    const double step = geom.distance(r, geom.nodes_per_ray - 1) - geom.distance(r, geom.nodes_per_ray - 2);
    const double guard_t = geom.reach[static_cast<std::size_t>(r)] + step;
    const auto guard = geom.seed + geom.directions[static_cast<std::size_t>(r)] * guard_t;
    field.deviation[base + n] = std::abs(sample_at(grid, guard) - mu);
    for (std::size_t k = 0; k <= n; ++k) peak = std::max(peak, field.deviation[base + k]);
  }
  field.node_cost.resize(static_cast<std::size_t>(geom.ray_count) * n);
  for (int r = 0; r < geom.ray_count; ++r) {
    const auto base = static_cast<std::size_t>(r) * stride;
    for (std::size_t k = 0; k < n; ++k) {
      const double step_up = field.deviation[base + k + 1] - field.deviation[base + k];
      field.node_cost[static_cast<std::size_t>(r) * n + k] = std::max(0.0, peak - step_up);
    }
  }
  return field;
}

CostField make_cost_field(int rays, int nodes, std::vector<double> node_cost) {
  if (rays < 1 || nodes < 1 || node_cost.size() != static_cast<std::size_t>(rays) * static_cast<std::size_t>(nodes)) {
    throw ValidationError("cost field size does not match rays x nodes");
  }
  for (double c : node_cost) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("node costs must be finite and >= 0");
  }
  CostField field;
  field.rays = rays;
  field.nodes = nodes;
  field.node_cost = std::move(node_cost);
  return field;
}

std::vector<TerminalArc> terminal_weights(const CostField& cost) {
  std::vector<TerminalArc> arcs;
  arcs.reserve(static_cast<std::size_t>(cost.rays) * static_cast<std::size_t>(cost.nodes));
  for (int r = 0; r < cost.rays; ++r) {
    arcs.push_back({{r, 0}, true, Capacity::infinite()});
    for (int k = 1; k < cost.nodes; ++k) {
      const double w = cost.cost(r, k) - cost.cost(r, k - 1);
      if (w < 0.0) {
        arcs.push_back({{r, k}, true, Capacity::finite(-w)});
      } else if (w > 0.0) {
        arcs.push_back({{r, k}, false, Capacity::finite(w)});
      }
    }
  }
  return arcs;
}

LatticeNetwork assemble_network(const RayGeometry& geom, const CostField& cost, const BuildConfig& cfg) {
  if (cost.rays != geom.ray_count || cost.nodes != geom.nodes_per_ray) {
    throw ValidationError("cost field and ray geometry describe different lattices");
  }
  if (cfg.delta < 0 || cfg.delta > geom.nodes_per_ray - 1) {
    throw ValidationError("delta must be in [0, nodes_per_ray - 1]");
  }
  const NodeMap map{geom.ray_count, geom.nodes_per_ray};
  const int n = geom.nodes_per_ray;
  FlowNetwork net(static_cast<NodeId>(geom.ray_count * n));
  const auto terminals = terminal_weights(cost);
  net.reserve(static_cast<std::size_t>(geom.ray_count) * static_cast<std::size_t>(n - 1) +
              2 * geom.adjacency.size() * static_cast<std::size_t>(n) + terminals.size());
  const auto inf = Capacity::infinite();

  for (int r = 0; r < geom.ray_count; ++r) {
    for (int k = 1; k < n; ++k) net.add_arc(map.id({r, k}), map.id({r, k - 1}), inf);
  }
  for (const auto& [a, b] : geom.adjacency) {
    for (int k = 0; k < n; ++k) {
      const int lower = std::max(0, k - cfg.delta);
      net.add_arc(map.id({a, k}), map.id({b, lower}), inf);
      net.add_arc(map.id({b, k}), map.id({a, lower}), inf);
    }
  }
  for (const auto& t : terminals) {
    if (t.from_source) {
      net.add_arc(kSource, map.id(t.node), t.capacity);
    } else {
      net.add_arc(map.id(t.node), kSink, t.capacity);
    }
  }
  return {std::move(net), map};
}

FlowNetwork apply_refinement(const FlowNetwork& net, const NodeMap& map, const RefinementSeed& seed,
                             const RayGeometry& geom) {
  const auto [r, k] = seed.snapped;
  if (r < 0 || r >= geom.ray_count || k < 0 || k >= geom.nodes_per_ray) {
    throw ValidationError("refinement seed '" + seed.id + "' is not snapped to a valid node");
  }
  std::vector<Arc> extra;
  const auto inf = Capacity::infinite();
  for (int j = 0; j < geom.nodes_per_ray; ++j) {
    if (j <= k) {
      extra.push_back({kSource, map.id({r, j}), inf});
    } else {
      extra.push_back({map.id({r, j}), kSink, inf});
    }
  }
  std::vector<ArcRef> removed;
  if (k < geom.nodes_per_ray - 1) removed.push_back({map.id({r, k + 1}), map.id({r, k})});
  return rebuild_with(net, extra, removed);
}

void snap_refinements(const RayGeometry& geom, std::span<RefinementSeed> seeds) {
  for (auto& seed : seeds) seed.snapped = closest_node(geom, seed.position);
}

double boundary_cost(const CostField& cost, std::span<const int> boundary) {
  if (boundary.size() != static_cast<std::size_t>(cost.rays)) {
    throw ValidationError("boundary length does not match the ray count");
  }
  double total = 0.0;
  for (int r = 0; r < cost.rays; ++r) {
    const int b = boundary[static_cast<std::size_t>(r)];
    for (int k = 1; k < cost.nodes; ++k) {
      const double w = cost.cost(r, k) - cost.cost(r, k - 1);
      if (k <= b && w > 0.0) total += w;
      if (k > b && w < 0.0) total -= w;
    }
  }
  return total;
}

}  // namespace refcut
