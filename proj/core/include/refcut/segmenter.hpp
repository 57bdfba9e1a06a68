#pragma once

#include <array>
#include <memory>
#include <vector>

#include "refcut/cutbuilder.hpp"
#include "refcut/flownet.hpp"
#include "refcut/imaging.hpp"
#include "refcut/templates.hpp"

namespace refcut {

struct SegmentationRequest {
  std::shared_ptr<const ScalarGrid> grid;
  Template shape;
  Vec3 primary_seed{};
  std::vector<RefinementSeed> refinements;
  BuildConfig config;
  Solver solver = Solver::augmenting_tree;
};

/// Per-phase wall time in milliseconds from a monotonic clock.
struct PhaseTiming {
  double rays_ms = 0.0;
  double sampling_ms = 0.0;
  double assembly_ms = 0.0;
  double solve_ms = 0.0;
  double extraction_ms = 0.0;
  double total_ms = 0.0;
};

/// 2D: closed polyline through `vertices` in ray order (`triangles` empty).
/// 3D: one vertex per ray, then the top and bottom pole points; triangles index them.
struct Contour {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  friend bool operator==(const Contour&, const Contour&) = default;
};

struct SegmentationResult {
  std::vector<int> boundary;
  Contour contour;
  Mask mask;
  double flow_value = 0.0;
  PhaseTiming timing;
  std::vector<NodeIndex> snapped_refinements;
  std::vector<Vec3> template_corners;
  double mu = 0.0;
};

/// Full pipeline: rays, costs, network, refinement wiring, solve, boundary,
/// contour, mask. Throws InfeasibleRefinementError naming conflicting seeds and
/// ValidationError for bad requests.
SegmentationResult segment(const SegmentationRequest& req);

/// Circle (2D) or sphere (3D) whose diameter is half the smallest physical extent.
Template default_template(const GridGeometry& g);

struct LatticeSolution {
  std::vector<int> boundary;
  CutLabels labels;
};

/// Builds and solves the lattice network for given costs and already snapped
/// refinement seeds. Exposed for oracle comparisons on synthetic costs.
LatticeSolution solve_lattice(const RayGeometry& geom, const CostField& cost, const BuildConfig& cfg,
                              std::span<const RefinementSeed> refinements, Solver solver = Solver::augmenting_tree);

/// b_r = outermost depth of ray r on the source side.
std::vector<int> extract_boundary(const CutLabels& labels, const RayGeometry& geom, const NodeMap& map);

Contour boundary_to_contour(std::span<const int> boundary, const RayGeometry& geom);

/// Radial star-shaped fill about the seed: a voxel centre is foreground when its
/// distance from the seed is at most the boundary radius interpolated along its
/// direction (between adjacent rays in 2D, bilinearly over the lat-long cell in 3D).
Mask contour_to_mask(const Contour& contour, const RayGeometry& geom, const GridGeometry& grid);

/// Throws InfeasibleRefinementError when two snapped refinements cannot both
/// hold: |k_a - k_b| > delta * (ray graph distance between their rays).
void check_refinement_consistency(const RayGeometry& geom, std::span<const RefinementSeed> refinements, int delta);

}  // namespace refcut
