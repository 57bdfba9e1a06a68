#include <doctest.h>

#include "refcut/documents.hpp"
#include "refcut/error.hpp"

using namespace refcut;

TEST_CASE("template documents round trip") {
  const std::vector<Template> shapes{
      make_template(TemplateKind::circle, {60.0}),
      make_template(TemplateKind::sphere, {44.0}),
      make_template(TemplateKind::rectangle, {40.0, 60.0}),
      make_template(TemplateKind::cube, {10.0, 20.0, 30.0}),
      make_template(TemplateKind::triangle, {0, 10, -8, -5, 8, -5}),
      make_template(TemplateKind::polygon, {0, 20, -15, -10, 0, -3, 15, -10}),
  };
  for (const auto& t : shapes) {
    const auto doc = to_json(t);
    CHECK(doc.at("kind") == std::string(to_string(t.kind())));
    CHECK(template_from_json(doc) == t);
    CHECK(template_from_json(Json::parse(doc.dump())) == t);
  }
  CHECK(to_json(shapes[0]) == Json::parse(R"({"kind":"circle","diameter":60.0})"));
  CHECK(to_json(shapes[2]) == Json::parse(R"({"kind":"rectangle","width":40.0,"height":60.0})"));
}

TEST_CASE("template document errors") {
  CHECK_THROWS_AS(template_from_json(Json::parse(R"({"kind":"circle"})")), ValidationError);
  CHECK_THROWS_AS(template_from_json(Json::parse(R"({"kind":"blob","diameter":3})")), ValidationError);
  CHECK_THROWS_AS(template_from_json(Json::parse(R"({"kind":"circle","diameter":"big"})")), ValidationError);
  CHECK_THROWS_AS(template_from_json(Json::parse(R"({"kind":"circle","diameter":-1})")), ValidationError);
  CHECK_THROWS_AS(template_from_json(Json::parse(R"([1,2])")), ValidationError);
  CHECK_THROWS_AS(template_from_json(Json::parse(R"({"kind":"polygon","corners":[[0,0],[1,1],[1,0],[0,1]]})")),
                  ValidationError);
}

TEST_CASE("compact template specs") {
  CHECK(parse_template_spec("circle:60") == make_template(TemplateKind::circle, {60.0}));
  CHECK(parse_template_spec("sphere:50") == make_template(TemplateKind::sphere, {50.0}));
  CHECK(parse_template_spec("rectangle:40x60") == make_template(TemplateKind::rectangle, {40.0, 60.0}));
  CHECK(parse_template_spec("cube:20x30x40") == make_template(TemplateKind::cube, {20.0, 30.0, 40.0}));
  CHECK(parse_template_spec("triangle:0,10;-8,-5;8,-5") == make_template(TemplateKind::triangle, {0, 10, -8, -5, 8, -5}));
  CHECK_THROWS_AS(parse_template_spec("circle"), ValidationError);
  CHECK_THROWS_AS(parse_template_spec("circle:abc"), ValidationError);
  CHECK_THROWS_AS(parse_template_spec("rectangle:40"), ValidationError);
  CHECK_THROWS_AS(parse_template_spec("hexagon:3"), ValidationError);
}

TEST_CASE("config documents") {
  BuildConfig cfg;
  cfg.delta = 3;
  cfg.rays = 40;
  cfg.nodes_per_ray = 25;
  cfg.mean_radius_mm = 4.5;
  cfg.include_refinement_in_mean = true;
  const auto shape = make_template(TemplateKind::rectangle, {40.0, 60.0});
  const auto doc = to_json(cfg, shape);
  for (const char* key : {"delta", "rays", "nodes_per_ray", "latitudes", "mean_radius_mm", "include_refinement_in_mean", "template"}) {
    CHECK(doc.contains(key));
  }
  const auto back = apply_config(doc);
  CHECK(back.config == cfg);
  REQUIRE(back.shape.has_value());
  CHECK(*back.shape == shape);

  SUBCASE("partial overlay keeps the other fields") {
    const auto merged = apply_config(Json::parse(R"({"delta": 1})"), back);
    CHECK(merged.config.delta == 1);
    CHECK(merged.config.rays == 40);
    CHECK(*merged.shape == shape);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(apply_config(Json::parse(R"({"speed": 1})")), ValidationError);
    CHECK_THROWS_AS(apply_config(Json::parse(R"({"delta": "two"})")), ValidationError);
    CHECK_THROWS_AS(apply_config(Json::parse(R"({"delta": 1.5})")), ValidationError);
    CHECK_THROWS_AS(apply_config(Json::parse(R"({"delta": 30})")), ValidationError);
    CHECK_THROWS_AS(apply_config(Json::parse(R"({"mean_radius_mm": 0})")), ValidationError);
    CHECK_THROWS_AS(apply_config(Json::parse(R"({"include_refinement_in_mean": 1})")), ValidationError);
    CHECK_THROWS_AS(apply_config(Json::parse(R"(7)")), ValidationError);
  }
}

TEST_CASE("points") {
  CHECK(to_json(Vec3{1, 2, 3}, 2) == Json::parse("[1.0,2.0]"));
  CHECK(to_json(Vec3{1, 2, 3}, 3) == Json::parse("[1.0,2.0,3.0]"));
  CHECK(point_from_json(Json::parse("[1.5, 2]")) == Vec3{1.5, 2, 0});
  CHECK(point_from_json(Json::parse("[1, 2, 3]")) == Vec3{1, 2, 3});
  CHECK_THROWS_AS(point_from_json(Json::parse("[1]")), ValidationError);
  CHECK_THROWS_AS(point_from_json(Json::parse(R"(["a", 1])")), ValidationError);
  CHECK_THROWS_AS(point_from_json(Json::parse(R"({"x": 1})")), ValidationError);
}

TEST_CASE("segmentation result document") {
  PhantomSpec spec;
  spec.kind = PhantomKind::disc;
  spec.dims = {48, 48};
  spec.spacing = {1.0, 1.0};
  spec.center = {23.5, 23.5, 0.0};
  spec.radius_or_halfextent = {12.0};
  const auto ph = make_phantom(spec, 1);
  SegmentationRequest req;
  req.grid = std::make_shared<const ScalarGrid>(ph.grid);
  req.shape = make_template(TemplateKind::rectangle, {36.0, 36.0});
  req.primary_seed = spec.center;
  req.refinements.push_back({"r1", {35.0, 23.5, 0.0}, {}});
  const auto result = segment(req);
  const auto doc = to_json(result, 2);
  CHECK(doc.at("boundary").get<std::vector<int>>() == result.boundary);
  CHECK(doc.at("contour").at("vertices").size() == result.contour.vertices.size());
  CHECK(doc.at("flow_value").get<double>() == result.flow_value);
  CHECK(doc.at("mu").get<double>() == result.mu);
  CHECK(doc.at("mask_voxels").get<std::size_t>() == result.mask.count());
  REQUIRE(doc.at("snapped_refinements").size() == 1);
  CHECK(doc.at("snapped_refinements")[0].at("ray").get<int>() == result.snapped_refinements[0].ray);
  CHECK(doc.at("snapped_refinements")[0].at("depth").get<int>() == result.snapped_refinements[0].depth);
  CHECK(doc.at("template_corners").size() == 4);
  for (const char* key : {"rays", "sampling", "assembly", "solve", "extraction", "total"}) {
    CHECK(doc.at("timing_ms").contains(key));
  }
}
