#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "refcut/cutbuilder.hpp"
#include "refcut/evalbench.hpp"
#include "refcut/segmenter.hpp"
#include "refcut/templates.hpp"

// JSON documents shared by the CLI and the session service.
//
// Template:  {"kind": "circle", "diameter": 60}
//            {"kind": "rectangle", "width": 40, "height": 60}
//            {"kind": "cube", "size": [x, y, z]}
//            {"kind": "sphere", "diameter": 50}
//            {"kind": "triangle" | "polygon", "corners": [[x, y], ...]}
// Config:    {"delta", "rays", "nodes_per_ray", "latitudes", "mean_radius_mm",
//             "include_refinement_in_mean", "template"}; every key optional.

namespace refcut {

using Json = nlohmann::json;

Json to_json(const Template& shape);
Template template_from_json(const Json& doc);

/// Compact form used on the command line: `circle:60`, `sphere:50`,
/// `rectangle:40x60`, `cube:20x30x40`, `triangle:x,y;x,y;x,y`, `polygon:...`.
Template parse_template_spec(std::string_view spec);

struct ConfigDocument {
  BuildConfig config;
  std::optional<Template> shape;
};

Json to_json(const BuildConfig& cfg, const std::optional<Template>& shape = std::nullopt);

/// Overlays the keys present in `doc` onto `base`. Unknown keys and wrong types
/// throw ValidationError; the merged config is validated.
ConfigDocument apply_config(const Json& doc, ConfigDocument base = {});

/// [x, y] in 2D, [x, y, z] in 3D.
Json to_json(const Vec3& p, int ndim);
/// Accepts 2 or 3 numbers; missing z is 0.
Vec3 point_from_json(const Json& doc);

Json to_json(const PhaseTiming& t);
Json to_json(const Contour& c, int ndim);
Json to_json(const SegmentationResult& result, int ndim);
Json to_json(const BenchmarkReport& report);

}  // namespace refcut
