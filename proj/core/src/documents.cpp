#include "refcut/documents.hpp"

#include <cmath>
#include <cstdlib>
#include <type_traits>

#include "refcut/error.hpp"

namespace refcut {

namespace {

double number(const Json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(std::string("template document is missing '") + key + "'");
  if (!it->is_number()) throw ValidationError(std::string("'") + key + "' must be a number");
  return it->get<double>();
}

std::vector<double> numbers(const Json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_array()) throw ValidationError(std::string("'") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : *it) {
    if (!v.is_number()) throw ValidationError(std::string("'") + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

double parse_number(std::string_view text) {
  // from_chars for double is missing in older libstdc++; strtod on a copy is enough here.
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ValidationError("not a number: '" + s + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename T>
T typed(const Json& v, const char* key) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ValidationError(std::string("'") + key + "' must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ValidationError(std::string("'") + key + "' must be an integer");
  } else {
    if (!v.is_number()) throw ValidationError(std::string("'") + key + "' must be a number");
  }
  return v.get<T>();
}

}  // namespace

Json to_json(const Template& shape) {
  Json doc{{"kind", std::string(to_string(shape.kind()))}};
  const auto& p = shape.size_params();
  switch (shape.kind()) {
    case TemplateKind::circle:
    case TemplateKind::sphere:
      doc["diameter"] = p.at(0);
      break;
    case TemplateKind::rectangle:
      doc["width"] = p.at(0);
      doc["height"] = p.at(1);
      break;
    case TemplateKind::cube:
      doc["size"] = p;
      break;
    case TemplateKind::triangle:
    case TemplateKind::polygon: {
      Json corners = Json::array();
      for (std::size_t i = 0; i + 1 < p.size(); i += 2) corners.push_back({p[i], p[i + 1]});
      doc["corners"] = corners;
      break;
    }
  }
  return doc;
}

Template template_from_json(const Json& doc) {
  if (!doc.is_object()) throw ValidationError("template document must be an object");
  const auto kind_it = doc.find("kind");
  if (kind_it == doc.end() || !kind_it->is_string()) throw ValidationError("template document needs a 'kind' string");
  const auto kind = parse_template_kind(kind_it->get<std::string>());
  switch (kind) {
    case TemplateKind::circle:
    case TemplateKind::sphere:
      return make_template(kind, {number(doc, "diameter")});
    case TemplateKind::rectangle:
      return make_template(kind, {number(doc, "width"), number(doc, "height")});
    case TemplateKind::cube:
      return make_template(kind, numbers(doc, "size"));
    case TemplateKind::triangle:
    case TemplateKind::polygon: {
      const auto it = doc.find("corners");
      if (it == doc.end() || !it->is_array()) throw ValidationError("'corners' must be an array of [x, y] pairs");
      std::vector<double> flat;
      for (const auto& c : *it) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
          throw ValidationError("'corners' must be an array of [x, y] pairs");
        }
        flat.push_back(c[0].get<double>());
        flat.push_back(c[1].get<double>());
      }
      return make_template(kind, std::move(flat));
    }
  }
  throw ValidationError("unsupported template kind");
}

Template parse_template_spec(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw ValidationError("template spec must look like kind:size, e.g. circle:60 or rectangle:40x60");
  }
  const auto kind = parse_template_kind(spec.substr(0, colon));
  const auto body = spec.substr(colon + 1);
  std::vector<double> params;
  if (kind == TemplateKind::triangle || kind == TemplateKind::polygon) {
    for (auto corner : split(body, ';')) {
      const auto xy = split(corner, ',');
      if (xy.size() != 2) throw ValidationError("polygon corners must be given as x,y;x,y;...");
      params.push_back(parse_number(xy[0]));
      params.push_back(parse_number(xy[1]));
    }
  } else {
    for (auto part : split(body, 'x')) params.push_back(parse_number(part));
  }
  return make_template(kind, std::move(params));
}

Json to_json(const BuildConfig& cfg, const std::optional<Template>& shape) {
  Json doc{{"delta", cfg.delta},
           {"rays", cfg.rays},
           {"nodes_per_ray", cfg.nodes_per_ray},
           {"latitudes", cfg.latitudes},
           {"mean_radius_mm", cfg.mean_radius_mm},
           {"include_refinement_in_mean", cfg.include_refinement_in_mean}};
  if (shape) doc["template"] = to_json(*shape);
  return doc;
}

ConfigDocument apply_config(const Json& doc, ConfigDocument base) {
  if (!doc.is_object()) throw ValidationError("config document must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "delta") {
      base.config.delta = typed<int>(value, "delta");
    } else if (key == "rays") {
      base.config.rays = typed<int>(value, "rays");
    } else if (key == "nodes_per_ray") {
      base.config.nodes_per_ray = typed<int>(value, "nodes_per_ray");
    } else if (key == "latitudes") {
      base.config.latitudes = typed<int>(value, "latitudes");
    } else if (key == "mean_radius_mm") {
      base.config.mean_radius_mm = typed<double>(value, "mean_radius_mm");
    } else if (key == "include_refinement_in_mean") {
      base.config.include_refinement_in_mean = typed<bool>(value, "include_refinement_in_mean");
    } else if (key == "template") {
      base.shape = template_from_json(value);
    } else {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }
  base.config.validate();
  return base;
}

Json to_json(const Vec3& p, int ndim) {
  if (ndim == 2) return Json::array({p.x, p.y});
  return Json::array({p.x, p.y, p.z});
}

Vec3 point_from_json(const Json& doc) {
  if (!doc.is_array() || doc.size() < 2 || doc.size() > 3) {
    throw ValidationError("a position must be an array of 2 or 3 numbers (mm)");
  }
  Vec3 p{};
  for (std::size_t a = 0; a < doc.size(); ++a) {
    if (!doc[a].is_number()) throw ValidationError("a position must be an array of 2 or 3 numbers (mm)");
    p[static_cast<int>(a)] = doc[a].get<double>();
    if (!std::isfinite(p[static_cast<int>(a)])) throw ValidationError("position coordinates must be finite");
  }
  return p;
}

Json to_json(const PhaseTiming& t) {
  return {{"rays", t.rays_ms},   {"sampling", t.sampling_ms},     {"assembly", t.assembly_ms},
          {"solve", t.solve_ms}, {"extraction", t.extraction_ms}, {"total", t.total_ms}};
}

Json to_json(const Contour& c, int ndim) {
  Json vertices = Json::array();
  for (const auto& v : c.vertices) vertices.push_back(to_json(v, ndim));
  Json doc{{"vertices", vertices}};
  if (ndim == 3) doc["triangles"] = c.triangles;
  return doc;
}

Json to_json(const SegmentationResult& result, int ndim) {
  Json snapped = Json::array();
  for (const auto& n : result.snapped_refinements) snapped.push_back({{"ray", n.ray}, {"depth", n.depth}});
  Json corners = Json::array();
  for (const auto& c : result.template_corners) corners.push_back(to_json(c, ndim));
  return {{"boundary", result.boundary},
          {"contour", to_json(result.contour, ndim)},
          {"flow_value", result.flow_value},
          {"mu", result.mu},
          {"mask_voxels", result.mask.count()},
          {"snapped_refinements", snapped},
          {"template_corners", corners},
          {"timing_ms", to_json(result.timing)}};
}

Json to_json(const BenchmarkReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json row{{"rays", r.rays},
             {"nodes", r.nodes},
             {"node_count", r.node_count},
             {"repetitions", r.repetitions},
             {"median_total_ms", r.median.total_ms},
             {"mean_total_ms", r.mean.total_ms},
             {"median_ms", to_json(r.median)},
             {"mean_ms", to_json(r.mean)}};
    row["budget_ms"] = r.budget_ms ? Json(*r.budget_ms) : Json(nullptr);
    row["target_ms"] = r.target_ms ? Json(*r.target_ms) : Json(nullptr);
    if (r.budget_ms) row["within_budget"] = r.median.total_ms <= *r.budget_ms;
    if (r.target_ms) row["meets_target"] = r.median.total_ms <= *r.target_ms;
    rows.push_back(row);
  }
  return {{"machine",
           {{"cpu_model", report.machine.cpu_model},
            {"hardware_threads", report.machine.hardware_threads},
            {"compiler", report.machine.compiler},
            {"build_type", report.machine.build_type}}},
          {"template", report.template_name},
          {"delta", report.delta},
          {"rows", rows}};
}

}  // namespace refcut
