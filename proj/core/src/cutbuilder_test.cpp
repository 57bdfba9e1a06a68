#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "refcut/cutbuilder.hpp"
#include "refcut/error.hpp"
#include "refcut/evalbench.hpp"

using namespace refcut;

namespace {

Capacity cap(double v) { return Capacity::finite(v); }

// Cut contribution of one ray whose source side is depths 0..b, evaluated
// straight from the node costs.
double ray_cut(const std::vector<double>& c, int b) {
  double total = 0.0;
  for (std::size_t k = 1; k < c.size(); ++k) {
    const double w = c[k] - c[k - 1];
    if (static_cast<int>(k) <= b && w > 0) total += w;
    if (static_cast<int>(k) > b && w < 0) total += -w;
  }
  return total;
}

std::vector<double> ray_costs(const CostField& f, int r) {
  std::vector<double> out;
  for (int k = 0; k < f.nodes; ++k) out.push_back(f.cost(r, k));
  return out;
}

struct Exhaustive {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<int> boundary;
};

Exhaustive exhaustive_boundary(const RayGeometry& g, const CostField& f, int delta) {
  Exhaustive best;
  std::vector<int> b(static_cast<std::size_t>(g.ray_count), 0);
  while (true) {
    bool ok = true;
    for (auto [x, y] : g.adjacency) ok = ok && std::abs(b[static_cast<std::size_t>(x)] - b[static_cast<std::size_t>(y)]) <= delta;
    if (ok) {
      double total = 0.0;
      for (int r = 0; r < g.ray_count; ++r) total += ray_cut(ray_costs(f, r), b[static_cast<std::size_t>(r)]);
      if (total < best.cost) {
        best.cost = total;
        best.boundary = b;
      }
    }
    int i = g.ray_count - 1;
    while (i >= 0 && ++b[static_cast<std::size_t>(i)] == g.nodes_per_ray) b[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
  }
  return best;
}

// Per-ray boundary read off the labels, plus a check that source sides are prefixes.
std::vector<int> read_boundary(const CutLabels& labels, const NodeMap& map, bool& monotone) {
  std::vector<int> b(static_cast<std::size_t>(map.rays), -1);
  monotone = true;
  for (int r = 0; r < map.rays; ++r) {
    bool seen_sink = false;
    for (int k = 0; k < map.nodes; ++k) {
      const bool src = labels.side[static_cast<std::size_t>(map.id({r, k}))] == Side::source;
      if (src && seen_sink) monotone = false;
      if (src) b[static_cast<std::size_t>(r)] = k;
      if (!src) seen_sink = true;
    }
  }
  return b;
}

CostField random_costs(std::mt19937_64& rng, int rays, int nodes) {
  std::uniform_int_distribution<int> u(0, 9);
  std::vector<double> c(static_cast<std::size_t>(rays * nodes));
  for (auto& x : c) x = u(rng);
  return make_cost_field(rays, nodes, c);
}

ScalarGrid disc_image(double fg, double bg, double noise, std::uint64_t seed) {
  PhantomSpec spec;
  spec.kind = PhantomKind::disc;
  spec.dims = {64, 64};
  spec.spacing = {1.0, 1.0};
  spec.center = {31.5, 31.5, 0.0};
  spec.radius_or_halfextent = {18.0};
  spec.fg_intensity = fg;
  spec.bg_intensity = bg;
  spec.noise_sigma = noise;
  return make_phantom(spec, seed).grid;
}

}  // namespace

TEST_CASE("config validation") {
  BuildConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.delta == 2);
  cfg.delta = -1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.delta = cfg.nodes_per_ray;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.delta = cfg.nodes_per_ray - 1;
  CHECK_NOTHROW(cfg.validate());
  cfg.mean_radius_mm = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("terminal weights from hand-evaluated differences") {
  const auto field = make_cost_field(1, 4, {5, 1, 0, 4});
  const auto arcs = terminal_weights(field);
  const std::vector<TerminalArc> expect{
      {{0, 0}, true, Capacity::infinite()},
      {{0, 1}, true, cap(4)},
      {{0, 2}, true, cap(1)},
      {{0, 3}, false, cap(4)},
  };
  CHECK(arcs == expect);

  // the oracle cut for this ray sits at depth 2 (total cost 0)
  for (int b = 0; b < 4; ++b) CHECK(ray_cut({5, 1, 0, 4}, b) >= ray_cut({5, 1, 0, 4}, 2));
  CHECK(ray_cut({5, 1, 0, 4}, 2) == 0.0);
  const auto g = generate_rays(make_template(TemplateKind::circle, {10.0}), {}, 3, 4);
  const auto three = make_cost_field(3, 4, {5, 1, 0, 4, 5, 1, 0, 4, 5, 1, 0, 4});
  const auto lat = assemble_network(g, three, BuildConfig{.delta = 1, .rays = 3, .nodes_per_ray = 4});
  bool monotone = false;
  const auto b = read_boundary(max_flow(lat.network), lat.map, monotone);
  CHECK(monotone);
  CHECK(b == std::vector<int>{2, 2, 2});
}

TEST_CASE("constant costs give only depth-0 source arcs") {
  const auto field = make_cost_field(5, 6, std::vector<double>(30, 3.0));
  const auto arcs = terminal_weights(field);
  REQUIRE(arcs.size() == 5);
  for (int r = 0; r < 5; ++r) {
    CHECK(arcs[static_cast<std::size_t>(r)].node == NodeIndex{r, 0});
    CHECK(arcs[static_cast<std::size_t>(r)].from_source);
    CHECK(arcs[static_cast<std::size_t>(r)].capacity.is_infinite());
  }

  // constant image: every cost equal, so the same holds for computed costs
  const ScalarGrid flat(GridGeometry::make({32, 32}), std::vector<double>(1024, 7.0));
  const auto g = generate_rays(make_template(TemplateKind::circle, {20.0}), {16, 16, 0}, 8, 6);
  const auto costs = compute_costs(flat, g, 7.0);
  CHECK(terminal_weights(costs).size() == 8);
}

TEST_CASE("make_cost_field validation") {
  CHECK_THROWS_AS(make_cost_field(2, 2, {1, 2, 3}), ValidationError);
  CHECK_THROWS_AS(make_cost_field(1, 2, {1, -2}), ValidationError);
  CHECK_THROWS_AS(make_cost_field(1, 2, {1, std::nan("")}), ValidationError);
}

TEST_CASE("estimate_mean") {
  BuildConfig cfg;
  SUBCASE("constant grid") {
    const ScalarGrid g(GridGeometry::make({10, 10}), std::vector<double>(100, 7.0));
    for (double radius : {0.1, 1.0, 3.0, 50.0}) {
      cfg.mean_radius_mm = radius;
      CHECK(estimate_mean(g, {4.5, 4.5, 0}, {}, cfg) == 7.0);
    }
  }
  SUBCASE("disc interior") {
    const auto g = disc_image(200, 50, 0, 1);
    CHECK(estimate_mean(g, {31.5, 31.5, 0}, {}, cfg) == 200.0);
  }
  SUBCASE("ball straddling an edge matches explicit enumeration") {
    std::vector<double> v(20 * 20);
    for (std::size_t j = 0; j < 20; ++j) {
      for (std::size_t i = 0; i < 20; ++i) v[j * 20 + i] = i < 10 ? 200.0 : 50.0;
    }
    const auto geom = GridGeometry::make({20, 20}, {0.5, 0.5}, {-3.0, 2.0});
    const ScalarGrid g(geom, v);
    const Vec3 seed{geom.voxel_center(10, 10, 0).x - 0.2, geom.voxel_center(10, 10, 0).y, 0.0};
    cfg.mean_radius_mm = 1.7;
    double sum = 0.0;
    int count = 0;
    for (std::size_t j = 0; j < 20; ++j) {
      for (std::size_t i = 0; i < 20; ++i) {
        const auto c = geom.voxel_center(i, j, 0);
        if ((c.x - seed.x) * (c.x - seed.x) + (c.y - seed.y) * (c.y - seed.y) <= 1.7 * 1.7) {
          sum += v[j * 20 + i];
          ++count;
        }
      }
    }
    REQUIRE(count > 0);
    CHECK(estimate_mean(g, seed, {}, cfg) == doctest::Approx(sum / count).epsilon(1e-12));
    CHECK(sum / count > 50.0);
    CHECK(sum / count < 200.0);
  }
  SUBCASE("empty ball falls back to the sample at the seed") {
    std::vector<double> v(16);
    for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<double>(i % 4);
    const ScalarGrid g(GridGeometry::make({4, 4}), v);
    cfg.mean_radius_mm = 0.1;
    const Vec3 p{1.5, 2.0, 0.0};
    CHECK(estimate_mean(g, p, {}, cfg) == sample_at(g, p));
  }
  SUBCASE("refinement balls only when enabled") {
    const auto g = disc_image(200, 50, 0, 1);
    std::vector<RefinementSeed> seeds{{"r1", {3.5, 3.5, 0.0}, {}}};
    cfg.mean_radius_mm = 2.0;
    CHECK(estimate_mean(g, {31.5, 31.5, 0}, seeds, cfg) == 200.0);
    cfg.include_refinement_in_mean = true;
    const double mixed = estimate_mean(g, {31.5, 31.5, 0}, seeds, cfg);
    CHECK(mixed == doctest::Approx(125.0));  // two equal-sized disjoint balls at 200 and 50
  }
  SUBCASE("bad radius") {
    cfg.mean_radius_mm = -1.0;
    const ScalarGrid g(GridGeometry::make({4, 4}), std::vector<double>(16, 1.0));
    CHECK_THROWS_AS(estimate_mean(g, {}, {}, cfg), ValidationError);
  }
}

TEST_CASE("cost field properties") {
  const auto g = generate_rays(make_template(TemplateKind::circle, {50.0}), {31.5, 31.5, 0}, 24, 16);
  const auto image = disc_image(200, 50, 6.0, 3);
  const auto base = compute_costs(image, g, 180.0);
  for (double c : base.node_cost) CHECK(c >= 0.0);
  for (double d : base.deviation) CHECK(d >= 0.0);
  CHECK(base.deviation.size() == 24u * 17u);

  SUBCASE("shift invariance") {
    std::vector<double> shifted(image.values().begin(), image.values().end());
    for (auto& v : shifted) v += 64.0;
    const auto moved = compute_costs(ScalarGrid(image.geometry(), shifted), g, 244.0);
    // equal up to rounding in the interpolation of the shifted values
    REQUIRE(moved.node_cost.size() == base.node_cost.size());
    for (std::size_t i = 0; i < base.node_cost.size(); ++i) CHECK(std::abs(moved.node_cost[i] - base.node_cost[i]) < 1e-9);
    for (std::size_t i = 0; i < base.deviation.size(); ++i) CHECK(std::abs(moved.deviation[i] - base.deviation[i]) < 1e-9);
  }
  SUBCASE("finite capacities scale exactly with the intensity gain") {
    std::vector<double> scaled(image.values().begin(), image.values().end());
    for (auto& v : scaled) v = 4.0 * v + 16.0;
    const auto s = compute_costs(ScalarGrid(image.geometry(), scaled), g, 4.0 * 180.0 + 16.0);
    const auto a = terminal_weights(base);
    const auto b = terminal_weights(s);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].node == b[i].node);
      CHECK(a[i].from_source == b[i].from_source);
      if (a[i].capacity.is_infinite()) {
        CHECK(b[i].capacity.is_infinite());
      } else {
        CHECK(b[i].capacity.value() == doctest::Approx(4.0 * a[i].capacity.value()).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("network counts") {
  const auto g = generate_rays(make_template(TemplateKind::circle, {10.0}), {}, 3, 2);
  const auto field = make_cost_field(3, 2, {0, 0, 0, 0, 0, 0});
  const auto lat = assemble_network(g, field, BuildConfig{.delta = 0, .rays = 3, .nodes_per_ray = 2});
  CHECK(lat.network.node_count() == 6);
  std::size_t intra = 0;
  std::size_t inter = 0;
  std::size_t terminal = 0;
  for (const auto& a : lat.network.arcs()) {
    if (a.from == kSource || a.to == kSink) {
      ++terminal;
      continue;
    }
    CHECK(a.capacity.is_infinite());
    const auto from = lat.map.node(a.from);
    const auto to = lat.map.node(a.to);
    if (from.ray == to.ray) {
      ++intra;
      CHECK(to.depth == from.depth - 1);
    } else {
      ++inter;
      CHECK(to.depth == from.depth);  // delta 0
    }
  }
  CHECK(intra == 3u * 1u);
  CHECK(inter == 2u * g.adjacency.size() * 2u);
  CHECK(terminal == 3u);
}

TEST_CASE("clamp rule at delta = N - 1") {
  const int n = 5;
  const auto g = generate_rays(make_template(TemplateKind::circle, {10.0}), {}, 4, n);
  const auto field = make_cost_field(4, n, std::vector<double>(20, 1.0));
  const auto lat = assemble_network(g, field, BuildConfig{.delta = n - 1, .rays = 4, .nodes_per_ray = n});
  for (const auto& a : lat.network.arcs()) {
    if (a.from < 0 || a.to < 0) continue;
    const auto from = lat.map.node(a.from);
    const auto to = lat.map.node(a.to);
    if (from.ray != to.ray) CHECK(to.depth == std::max(0, from.depth - (n - 1)));
    if (from.ray != to.ray && from.depth < n - 1) CHECK(to.depth == 0);
  }
}

TEST_CASE("solved boundary matches the exhaustive optimum") {
  std::mt19937_64 rng(77);
  int cases = 0;
  for (int rays = 3; rays <= 4; ++rays) {
    for (int nodes = 2; nodes <= 5; ++nodes) {
      for (int delta = 0; delta <= std::min(2, nodes - 1); ++delta) {
        for (int rep = 0; rep < 8; ++rep) {
          const auto g = generate_rays(make_template(TemplateKind::circle, {10.0}), {}, rays, nodes);
          const auto field = random_costs(rng, rays, nodes);
          const auto lat = assemble_network(g, field, BuildConfig{.delta = delta, .rays = rays, .nodes_per_ray = nodes});
          const auto labels = max_flow(lat.network);
          bool monotone = false;
          const auto b = read_boundary(labels, lat.map, monotone);
          const auto best = exhaustive_boundary(g, field, delta);
          CAPTURE(rays);
          CAPTURE(nodes);
          CAPTURE(delta);
          CHECK(monotone);
          for (int x : b) CHECK(x >= 0);
          for (auto [x, y] : g.adjacency) CHECK(std::abs(b[static_cast<std::size_t>(x)] - b[static_cast<std::size_t>(y)]) <= delta);
          CHECK(labels.flow_value == best.cost);
          CHECK(boundary_cost(field, b) == best.cost);
          // the evalbench oracle agrees with this independent enumeration
          CHECK(brute_force_boundary(g, field, BuildConfig{.delta = delta, .rays = rays, .nodes_per_ray = nodes}).cost ==
                best.cost);
          ++cases;
        }
      }
    }
  }
  CHECK(cases > 100);
}

TEST_CASE("refinement wiring") {
  const int rays = 6;
  const int nodes = 8;
  const auto g = generate_rays(make_template(TemplateKind::circle, {20.0}), {}, rays, nodes);
  std::mt19937_64 rng(5);
  const auto field = random_costs(rng, rays, nodes);
  const auto lat = assemble_network(g, field, BuildConfig{.delta = 1, .rays = rays, .nodes_per_ray = nodes});

  SUBCASE("forced depth on the seeded ray") {
    for (int k = 0; k < nodes; ++k) {
      RefinementSeed seed{"r1", g.position(2, k), {}};
      std::vector<RefinementSeed> seeds{seed};
      snap_refinements(g, seeds);
      REQUIRE(seeds[0].snapped == NodeIndex{2, k});
      const auto net = apply_refinement(lat.network, lat.map, seeds[0], g);
      bool monotone = false;
      const auto b = read_boundary(max_flow(net), lat.map, monotone);
      CHECK(monotone);
      CHECK(b[2] == k);
      const std::size_t removed = k < nodes - 1 ? 1 : 0;
      CHECK(net.arcs().size() == lat.network.arcs().size() + static_cast<std::size_t>(nodes) - removed);
      bool has_intra = false;
      for (const auto& a : net.arcs()) {
        if (k < nodes - 1 && a.from == lat.map.id({2, k + 1}) && a.to == lat.map.id({2, k})) has_intra = true;
      }
      CHECK_FALSE(has_intra);
    }
  }
  SUBCASE("delta 0 propagates the forced depth to every ray") {
    const auto flat = assemble_network(g, field, BuildConfig{.delta = 0, .rays = rays, .nodes_per_ray = nodes});
    RefinementSeed seed{"r1", {}, {4, 5}};
    const auto net = apply_refinement(flat.network, flat.map, seed, g);
    bool monotone = false;
    const auto b = read_boundary(max_flow(net), flat.map, monotone);
    CHECK(b == std::vector<int>(rays, 5));
  }
  SUBCASE("two seeds on one ray at different depths are infeasible") {
    const auto one = generate_rays(make_template(TemplateKind::circle, {20.0}), {}, 3, 10);
    const auto costs = make_cost_field(3, 10, std::vector<double>(30, 0.0));
    const auto l = assemble_network(one, costs, BuildConfig{.delta = 2, .rays = 3, .nodes_per_ray = 10});
    auto net = apply_refinement(l.network, l.map, RefinementSeed{"a", {}, {0, 3}}, one);
    net = apply_refinement(net, l.map, RefinementSeed{"b", {}, {0, 7}}, one);
    CHECK_THROWS_AS(max_flow(net), InfeasibleCutError);
  }
  SUBCASE("invalid snapped index") {
    CHECK_THROWS_AS(apply_refinement(lat.network, lat.map, RefinementSeed{"x", {}, {rays, 0}}, g), ValidationError);
    CHECK_THROWS_AS(apply_refinement(lat.network, lat.map, RefinementSeed{"x", {}, {0, nodes}}, g), ValidationError);
  }
  SUBCASE("seeds outside the template snap to the nearest node") {
    std::vector<RefinementSeed> seeds{{"far", g.directions[3] * 500.0, {}}};
    snap_refinements(g, seeds);
    CHECK(seeds[0].snapped == NodeIndex{3, nodes - 1});
  }
}

TEST_CASE("affine intensity change keeps the boundary on a noisy phantom") {
  const auto image = disc_image(200, 50, 7.5, 21);
  const auto g = generate_rays(make_template(TemplateKind::circle, {50.0}), {31.5, 31.5, 0}, 30, 30);
  BuildConfig cfg;
  const double mu = estimate_mean(image, g.seed, {}, cfg);
  const auto base = compute_costs(image, g, mu);
  const auto lat = assemble_network(g, base, cfg);
  bool monotone = false;
  const auto b0 = read_boundary(max_flow(lat.network), lat.map, monotone);
  CHECK(monotone);

  for (auto [a, shift] : std::vector<std::pair<double, double>>{{2.0, 0.0}, {0.5, 100.0}, {3.7, -12.25}}) {
    std::vector<double> v(image.values().begin(), image.values().end());
    for (auto& x : v) x = a * x + shift;
    const ScalarGrid t(image.geometry(), v);
    const double mu2 = estimate_mean(t, g.seed, {}, cfg);
    const auto costs = compute_costs(t, g, mu2);
    const auto l2 = assemble_network(g, costs, cfg);
    const auto b = read_boundary(max_flow(l2.network), l2.map, monotone);
    CAPTURE(a);
    CHECK(b == b0);
  }
}
