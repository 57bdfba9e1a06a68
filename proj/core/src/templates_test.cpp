#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "refcut/error.hpp"
#include "refcut/templates.hpp"

using namespace refcut;

namespace {


// Brute-force nearest node with explicit tie ordering.
NodeIndex scan_nearest(const RayGeometry& g, const Vec3& p) {
  NodeIndex best{-1, -1};
  double best_d = std::numeric_limits<double>::infinity();
  for (int r = 0; r < g.ray_count; ++r) {
    for (int k = 0; k < g.nodes_per_ray; ++k) {
      const double d = norm(g.position(r, k) - p);
      if (d < best_d) {
        best_d = d;
        best = {r, k};
      }
    }
  }
  return best;
}

// Ray-segment intersection distance, computed independently of the template code.
double polygon_hit(const std::vector<Vec3>& corners, const Vec3& dir) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const auto& a = corners[i];
    const auto& b = corners[(i + 1) % corners.size()];
    const double ex = b.x - a.x;
    const double ey = b.y - a.y;
    const double den = dir.x * ey - dir.y * ex;
    if (std::abs(den) < 1e-15) continue;
    const double t = (a.x * ey - a.y * ex) / den;
    const double s = (a.x * dir.y - a.y * dir.x) / den;
    if (t > 0 && s >= -1e-12 && s <= 1 + 1e-12) best = std::min(best, t);
  }
  return best;
}

}  // namespace

TEST_CASE("make_template") {
  SUBCASE("circle has a radius and no corners") {
    const auto t = make_template(TemplateKind::circle, {80.0});
    CHECK(t.corner_points().empty());
    CHECK(t.boundary_distance({1, 0, 0}) == doctest::Approx(40.0));
    CHECK(t.boundary_distance({0.6, 0.8, 0}) == doctest::Approx(40.0));
    CHECK(t.ndim() == 2);
  }
  SUBCASE("rectangle corners") {
    const auto t = make_template(TemplateKind::rectangle, {40.0, 60.0});
    std::set<std::pair<double, double>> got;
    for (const auto& c : t.corner_points()) got.emplace(c.x, c.y);
    CHECK(got == std::set<std::pair<double, double>>{{-20, -30}, {-20, 30}, {20, -30}, {20, 30}});
  }
  SUBCASE("cube corners and sphere") {
    const auto c = make_template(TemplateKind::cube, {10.0, 20.0, 30.0});
    CHECK(c.corner_points().size() == 8);
    CHECK(c.ndim() == 3);
    CHECK(c.boundary_distance({0, 0, -1}) == doctest::Approx(15.0));
    const auto s = make_template(TemplateKind::sphere, {50.0});
    CHECK(s.corner_points().empty());
    CHECK(s.boundary_distance({0, 0.6, 0.8}) == doctest::Approx(25.0));
  }
  SUBCASE("triangle is recentred on its vertex centroid") {
    const auto t = make_template(TemplateKind::triangle, {0, 0, 30, 0, 0, 30});
    Vec3 sum{};
    for (const auto& c : t.corner_points()) sum = sum + c;
    CHECK(std::abs(sum.x) < 1e-12);
    CHECK(std::abs(sum.y) < 1e-12);
    CHECK(t.corner_points().size() == 3);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(make_template(TemplateKind::circle, {0.0}), ValidationError);
    CHECK_THROWS_AS(make_template(TemplateKind::circle, {-3.0}), ValidationError);
    CHECK_THROWS_AS(make_template(TemplateKind::rectangle, {10.0}), ValidationError);
    CHECK_THROWS_AS(make_template(TemplateKind::cube, {10.0, 10.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(make_template(TemplateKind::triangle, {0, 0, 1, 0, 0, 1, 1, 1}), ValidationError);
    // bow-tie
    CHECK_THROWS_AS(make_template(TemplateKind::polygon, {0, 0, 10, 10, 10, 0, 0, 10}), ValidationError);
    // collinear
    CHECK_THROWS_AS(make_template(TemplateKind::triangle, {0, 0, 1, 1, 2, 2}), ValidationError);
    CHECK_THROWS_AS(parse_template_kind("hexagon"), ValidationError);
  }
  SUBCASE("kind names round trip") {
    for (auto k : {TemplateKind::circle, TemplateKind::rectangle, TemplateKind::triangle, TemplateKind::polygon,
                   TemplateKind::sphere, TemplateKind::cube}) {
      CHECK(parse_template_kind(to_string(k)) == k);
    }
  }
}

TEST_CASE("polygon boundary distance matches segment intersection") {
  // Concave but star-shaped arrow.
  const auto t = make_template(TemplateKind::polygon, {0, 20, -15, -10, 0, -3, 15, -10});
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> a(0.0, 2.0 * M_PI);
  for (int i = 0; i < 300; ++i) {
    const double th = a(rng);
    const Vec3 dir{std::cos(th), std::sin(th), 0.0};
    CHECK(t.boundary_distance(dir) == doctest::Approx(polygon_hit(t.corner_points(), dir)).epsilon(1e-9));
  }
}

TEST_CASE("circle lattice at 30 x 30") {
  const auto shape = make_template(TemplateKind::circle, {80.0});
  const auto g = generate_rays(shape, {0, 0, 0}, 30, 30);
  CHECK(g.ray_count == 30);
  CHECK(g.node_count() == 900);
  for (int r = 0; r < 30; ++r) {
    CHECK(norm(g.position(r, 29)) == doctest::Approx(40.0).epsilon(1e-12));
    CHECK(g.distance(r, 0) == doctest::Approx(0.8));
    const double angle = 2.0 * M_PI * r / 30.0;
    CHECK(g.directions[static_cast<std::size_t>(r)].x == doctest::Approx(std::cos(angle)));
    CHECK(g.directions[static_cast<std::size_t>(r)].y == doctest::Approx(std::sin(angle)));
    for (int k = 1; k < 30; ++k) {
      CHECK(g.distance(r, k) > g.distance(r, k - 1));
      // uniform spacing
      CHECK(g.distance(r, k) - g.distance(r, k - 1) == doctest::Approx((40.0 - 0.8) / 29.0));
    }
  }
}

TEST_CASE("four rays in a square hit edge midpoints") {
  const auto shape = make_template(TemplateKind::rectangle, {20.0, 20.0});
  const auto g = generate_rays(shape, {5, 5, 0}, 4, 5);
  for (int r = 0; r < 4; ++r) CHECK(g.reach[static_cast<std::size_t>(r)] == doctest::Approx(10.0));
  CHECK(g.position(1, 4).x == doctest::Approx(5.0));
  CHECK(g.position(1, 4).y == doctest::Approx(15.0));
}

TEST_CASE("2D adjacency is the cyclic ring") {
  for (int rays : {3, 4, 7, 30, 300}) {
    const auto g = generate_rays(make_template(TemplateKind::circle, {10.0}), {}, rays, 3);
    std::vector<std::pair<int, int>> expect;
    for (int r = 0; r < rays; ++r) expect.emplace_back(std::min(r, (r + 1) % rays), std::max(r, (r + 1) % rays));
    std::sort(expect.begin(), expect.end());
    CHECK(g.adjacency == expect);
    // single cycle: walking neighbours visits every ray once
    std::map<int, std::vector<int>> nbr;
    for (auto [a, b] : g.adjacency) {
      nbr[a].push_back(b);
      nbr[b].push_back(a);
    }
    int prev = -1;
    int cur = 0;
    int steps = 0;
    do {
      REQUIRE(nbr[cur].size() == 2);
      const int next = nbr[cur][0] != prev ? nbr[cur][0] : nbr[cur][1];
      prev = cur;
      cur = next;
      ++steps;
    } while (cur != 0 && steps <= rays);
    CHECK(steps == rays);
  }
}

TEST_CASE("3D lat-long lattice") {
  const auto shape = make_template(TemplateKind::sphere, {40.0});
  const auto g = generate_rays(shape, {1, 2, 3}, 8, 6, 4);
  CHECK(g.latitudes == 4);
  CHECK(g.longitudes == 8);
  CHECK(g.ray_count == 32);
  for (const auto& d : g.directions) CHECK(norm(d) == doctest::Approx(1.0));
  for (int r = 0; r < g.ray_count; ++r) CHECK(norm(g.position(r, 5) - g.seed) == doctest::Approx(20.0));

  std::set<std::pair<int, int>> adj(g.adjacency.begin(), g.adjacency.end());
  auto linked = [&](int a, int b) { return adj.count({std::min(a, b), std::max(a, b)}) > 0; };
  // longitude wraparound
  CHECK(linked(8 + 7, 8 + 0));
  // latitude neighbour
  CHECK(linked(8 + 3, 16 + 3));
  // pole rows are cliques, interior rows are not
  CHECK(linked(0, 4));
  CHECK(linked(24 + 1, 24 + 5));
  CHECK_FALSE(linked(8 + 1, 8 + 5));
  for (auto [a, b] : g.adjacency) CHECK(a < b);
  std::map<int, int> degree;
  for (auto [a, b] : g.adjacency) {
    ++degree[a];
    ++degree[b];
  }
  for (int r = 0; r < g.ray_count; ++r) CHECK(degree[r] >= 2);

  // default latitude count
  CHECK(generate_rays(shape, {}, 10, 3).latitudes == 5);
  CHECK(generate_rays(shape, {}, 3, 3).latitudes == 2);
  // dimensionality mismatch between template and seed is caught by the caller; 2D seeds drop z
  const auto flat = generate_rays(make_template(TemplateKind::circle, {10.0}), {1, 1, 9}, 3, 3);
  CHECK(flat.seed.z == 0.0);
}

TEST_CASE("lattice limits") {
  const auto shape = make_template(TemplateKind::circle, {10.0});
  CHECK_THROWS_AS(generate_rays(shape, {}, 2, 5), ValidationError);
  CHECK_THROWS_AS(generate_rays(shape, {}, 5, 1), ValidationError);
  CHECK_THROWS_AS(generate_rays(shape, {}, 5, kMaxNodesPerRay + 1), ValidationError);
  CHECK_THROWS_AS(generate_rays(shape, {}, kMaxRays + 1, 2), ValidationError);
  CHECK_THROWS_AS(generate_rays(shape, {}, 10000, 1000), ValidationError);
  CHECK_THROWS_AS(generate_rays(make_template(TemplateKind::sphere, {10.0}), {}, 8, 3, 1), ValidationError);
}

TEST_CASE("scaling the template scales distances only") {
  for (auto kind : {TemplateKind::circle, TemplateKind::rectangle, TemplateKind::triangle}) {
    std::vector<double> params = kind == TemplateKind::circle      ? std::vector<double>{30.0}
                                 : kind == TemplateKind::rectangle ? std::vector<double>{20.0, 35.0}
                                                                   : std::vector<double>{0, 10, -9, -6, 11, -5};
    std::vector<double> doubled = params;
    for (auto& p : doubled) p *= 2.0;
    const auto a = generate_rays(make_template(kind, params), {}, 17, 9);
    const auto b = generate_rays(make_template(kind, doubled), {}, 17, 9);
    CHECK(a.ray_count == b.ray_count);
    CHECK(a.nodes_per_ray == b.nodes_per_ray);
    CHECK(a.adjacency == b.adjacency);
    for (std::size_t i = 0; i < a.distances.size(); ++i) {
      CHECK(b.distances[i] == doctest::Approx(2.0 * a.distances[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("closest_node") {
  const auto g = generate_rays(make_template(TemplateKind::circle, {60.0}), {10, -4, 0}, 12, 20);
  SUBCASE("exact node positions map to themselves") {
    for (int r = 0; r < g.ray_count; ++r) {
      for (int k = 0; k < g.nodes_per_ray; ++k) REQUIRE(closest_node(g, g.position(r, k)) == NodeIndex{r, k});
    }
    CHECK(closest_node(g, g.position(5, 12)) == NodeIndex{5, 12});
  }
  SUBCASE("outside the template along ray 0") {
    const Vec3 far = g.seed + g.directions[0] * 100.0;
    CHECK(closest_node(g, far) == NodeIndex{0, 19});
    CHECK(scan_nearest(g, far) == NodeIndex{0, 19});
  }
  SUBCASE("equidistant between rays resolves to the smaller ray") {
    // Far along the bisector the outermost nodes of rays 2 and 3 tie.
    const int k = g.nodes_per_ray - 1;
    const double bisector = 2.5 * 2.0 * M_PI / 12.0;
    const Vec3 p = g.seed + Vec3{std::cos(bisector), std::sin(bisector), 0.0} * 200.0;
    CHECK(norm(g.position(2, k) - p) == doctest::Approx(norm(g.position(3, k) - p)).epsilon(1e-12));
    CHECK(closest_node(g, p) == NodeIndex{2, k});
  }
  SUBCASE("agrees with a brute-force scan on random points") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-60.0, 60.0);
    for (int i = 0; i < 500; ++i) {
      const Vec3 p{u(rng), u(rng), 0.0};
      const auto got = closest_node(g, p);
      const auto want = scan_nearest(g, p);
      CHECK(norm(g.position(got.ray, got.depth) - p) == doctest::Approx(norm(g.position(want.ray, want.depth) - p)));
    }
  }
  SUBCASE("3D self-consistency") {
    const auto g3 = generate_rays(make_template(TemplateKind::cube, {20.0, 30.0, 40.0}), {1, 1, 1}, 6, 5, 3);
    for (int r = 0; r < g3.ray_count; ++r) {
      for (int k = 0; k < g3.nodes_per_ray; ++k) REQUIRE(closest_node(g3, g3.position(r, k)) == NodeIndex{r, k});
    }
  }
}

TEST_CASE("world corners follow the seed") {
  const auto g = generate_rays(make_template(TemplateKind::rectangle, {40.0, 60.0}), {100, 50, 0}, 8, 4);
  const auto w = world_corners(g);
  REQUIRE(w.size() == 4);
  for (const auto& c : w) {
    CHECK(std::abs(std::abs(c.x - 100.0) - 20.0) < 1e-12);
    CHECK(std::abs(std::abs(c.y - 50.0) - 30.0) < 1e-12);
  }
}
