#pragma once

#include <span>
#include <string>
#include <vector>

#include "refcut/flownet.hpp"
#include "refcut/imaging.hpp"
#include "refcut/templates.hpp"

namespace refcut {

struct BuildConfig {
  /// Maximum boundary-depth difference between neighbouring rays.
  int delta = 2;
  /// 2D: ray count. 3D: rays per latitude row (longitudes).
  int rays = 30;
  int nodes_per_ray = 30;
  /// 3D only: latitude rows; 0 picks rays / 2.
  int latitudes = 0;
  double mean_radius_mm = 5.0;
  bool include_refinement_in_mean = false;

  /// Throws ValidationError unless 0 <= delta <= nodes_per_ray - 1 and mean_radius_mm > 0.
  void validate() const;

  friend bool operator==(const BuildConfig&, const BuildConfig&) = default;
};

struct RefinementSeed {
  std::string id;
  Vec3 position{};
  /// Valid only after snap_refinements against the current geometry.
  NodeIndex snapped{};
};

/// Per-node costs over an R x N lattice, index r * N + k.
struct CostField {
  int rays = 0;
  int nodes = 0;
  /// Mean intensity of the seed region.
  double mu = 0.0;
  /// |I(r,k) - mu|; one extra guard sample per ray past the template boundary,
  /// index r * (N + 1) + k, k in [0, N].
  std::vector<double> deviation;
  /// Boundary cost c(r,k) fed to the terminal rule; lower where the deviation
  /// profile steps up just outside node k. Always >= 0.
  std::vector<double> node_cost;

  double cost(int ray, int depth) const {
    return node_cost[static_cast<std::size_t>(ray) * static_cast<std::size_t>(nodes) + static_cast<std::size_t>(depth)];
  }
};

/// Mean of voxel values whose centres fall inside the averaging ball around the
/// primary seed (union with the refinement balls when the config asks for it).
/// Falls back to sample_at(primary) when no voxel centre is inside.
double estimate_mean(const ScalarGrid& grid, const Vec3& primary, std::span<const RefinementSeed> refinements,
                     const BuildConfig& cfg);

/// Samples the image along every ray and derives deviation and node costs.
CostField compute_costs(const ScalarGrid& grid, const RayGeometry& geom, double mu);

/// Wraps externally supplied node costs (each >= 0) as a CostField.
CostField make_cost_field(int rays, int nodes, std::vector<double> node_cost);

struct TerminalArc {
  NodeIndex node;
  bool from_source = false;
  Capacity capacity;

  friend bool operator==(const TerminalArc&, const TerminalArc&) = default;
};

/// Depth 0: infinite SOURCE arc. Depth k >= 1: w = c(k) - c(k-1); w < 0 gives
/// SOURCE -> node with -w, w > 0 gives node -> SINK with w, w == 0 gives nothing.
std::vector<TerminalArc> terminal_weights(const CostField& cost);

/// Dense node ids: id = ray * nodes + depth.
struct NodeMap {
  int rays = 0;
  int nodes = 0;

  NodeId id(NodeIndex n) const { return static_cast<NodeId>(n.ray * nodes + n.depth); }
  NodeIndex node(NodeId id) const { return {id / nodes, id % nodes}; }
};

struct LatticeNetwork {
  FlowNetwork network;
  NodeMap map;
};

/// Intra arcs (r,k) -> (r,k-1) and, for each adjacent ray pair, inter arcs
/// (r,k) -> (r', max(0, k - delta)) in both directions, all infinite; plus the
/// terminal arcs of `cost`.
LatticeNetwork assemble_network(const RayGeometry& geom, const CostField& cost, const BuildConfig& cfg);

/// Forces the cut through seed.snapped = (r, k): infinite SOURCE -> (r, j) for
/// j <= k, infinite (r, j) -> SINK for j > k, and the intra arc (r, k+1) -> (r, k)
/// removed when k < N - 1.
FlowNetwork apply_refinement(const FlowNetwork& net, const NodeMap& map, const RefinementSeed& seed,
                             const RayGeometry& geom);

/// Re-snaps every refinement seed to its closest node in `geom`.
void snap_refinements(const RayGeometry& geom, std::span<RefinementSeed> seeds);

/// Total terminal capacity cut by a ray-monotone boundary (source side = depths
/// 0..b_r on each ray).
double boundary_cost(const CostField& cost, std::span<const int> boundary);

}  // namespace refcut
