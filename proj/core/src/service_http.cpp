#include <algorithm>
#include <cmath>
#include <map>

#include <httplib.h>

#include "refcut/error.hpp"
#include "refcut/service.hpp"

namespace refcut {

namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes to_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

ImageFormat sniff_format(const std::string& body) {
  if (body.size() >= 2 && body[0] == 'P' && (body[1] == '5' || body[1] == '2')) return ImageFormat::pgm;
  if (body.size() >= 8 && static_cast<unsigned char>(body[0]) == 0x89 && body.compare(1, 3, "PNG") == 0) {
    return ImageFormat::png;
  }
  if (body.find("NDims") != std::string::npos || body.find("ObjectType") != std::string::npos) return ImageFormat::mhd;
  throw FormatError("unrecognised image payload; pass format=pgm|png|mhd", 0);
}

ScalarGrid decode_upload(const std::string& body, std::optional<ImageFormat> format, const std::optional<std::string>& raw) {
  const auto fmt = format ? *format : sniff_format(body);
  switch (fmt) {
    case ImageFormat::pgm: return decode_pgm(to_bytes(body));
    case ImageFormat::png: return decode_png(to_bytes(body));
    case ImageFormat::mhd:
      return decode_mhd(body, [&](const std::string& name) -> Bytes {
        if (!raw) throw ValidationError("mhd upload needs the payload '" + name + "' in a 'raw' form field");
        return to_bytes(*raw);
      });
  }
  throw ValidationError("unsupported image format");
}

void send_json(httplib::Response& res, int status, const Json& doc) {
  res.status = status;
  res.set_content(doc.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                const std::vector<std::string>& seed_ids = {}) {
  Json err{{"code", code}, {"message", message}};
  if (!seed_ids.empty()) err["seed_ids"] = seed_ids;
  send_json(res, status, {{"error", err}});
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const FormatError& e) {
      send_error(res, 400, "format", e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, "validation", e.what());
    } catch (const Json::exception& e) {
      send_error(res, 400, "bad_document", e.what());
    } catch (const InfeasibleRefinementError& e) {
      send_error(res, 409, "infeasible_refinement", e.what(), e.seed_ids());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  auto doc = Json::parse(req.body);
  if (!doc.is_object()) throw ValidationError("request body must be a JSON object");
  return doc;
}

std::optional<std::uint64_t> client_revision(const Json& doc) {
  const auto it = doc.find("client_revision");
  if (it == doc.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    throw ValidationError("client_revision must be a non-negative integer");
  }
  return it->get<std::uint64_t>();
}

Vec3 position(const Json& doc) {
  const auto it = doc.find("position");
  if (it == doc.end()) throw ValidationError("missing 'position' (mm)");
  return point_from_json(*it);
}

Json outcome_doc(const MutationOutcome& out) {
  Json doc{{"revision", out.revision}, {"stale_client", out.stale_client}};
  if (!out.seed_id.empty()) doc["seed_id"] = out.seed_id;
  return doc;
}

int parse_axis(const std::string& s) {
  if (s == "x" || s == "0") return 0;
  if (s == "y" || s == "1") return 1;
  if (s == "z" || s == "2") return 2;
  throw ValidationError("axis must be x, y or z");
}

// Plane orthogonal to `axis`: z -> (x, y), y -> (x, z), x -> (y, z); first axis runs along image rows.
template <typename Pixel>
Bytes extract_slice(const GridGeometry& g, int axis, std::size_t index, std::size_t& width, std::size_t& height,
                    Pixel pixel) {
  if (axis >= g.ndim && !(axis == 2 && g.ndim == 2)) throw ValidationError("axis out of range");
  if (index >= g.dims[axis]) throw ValidationError("slice index out of range");
  const int u = axis == 0 ? 1 : 0;
  const int v = axis == 2 ? 1 : 2;
  width = g.dims[u];
  height = g.dims[v];
  Bytes out(width * height);
  std::array<std::size_t, 3> ijk{0, 0, 0};
  ijk[axis] = index;
  for (std::size_t b = 0; b < height; ++b) {
    for (std::size_t a = 0; a < width; ++a) {
      ijk[u] = a;
      ijk[v] = b;
      out[b * width + a] = pixel(g.index(ijk[0], ijk[1], ijk[2]));
    }
  }
  return out;
}

}  // namespace

struct SessionServer::Impl {
  SessionManager& sessions;
  httplib::Server http;
  std::thread thread;
  std::mutex window_mutex;
  std::map<std::string, std::pair<double, double>> windows;

  explicit Impl(SessionManager& s) : sessions(s) { routes(); }

  // Display window per session; the grid of a session never changes.
  std::pair<double, double> window(const std::string& id, const ScalarGrid& grid) {
    std::lock_guard lock(window_mutex);
    auto it = windows.find(id);
    if (it != windows.end()) return it->second;
    const auto values = grid.values();
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (windows.size() > 64) windows.clear();
    return windows[id] = {*lo, *hi};
  }

  void routes() {
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, PATCH, DELETE, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
    http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    http.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<ImageFormat> format;
      std::optional<std::string> raw;
      std::string image;
      ConfigDocument config;
      if (req.is_multipart_form_data()) {
        if (!req.has_file("image")) throw ValidationError("multipart upload needs an 'image' part");
        const auto part = req.get_file_value("image");
        image = part.content;
        if (req.has_file("format")) {
          format = parse_image_format(req.get_file_value("format").content);
        } else if (!part.filename.empty()) {
          try {
            format = format_from_path(part.filename);
          } catch (const ValidationError&) {
          }
        }
        if (req.has_file("raw")) raw = req.get_file_value("raw").content;
        if (req.has_file("config")) config = apply_config(Json::parse(req.get_file_value("config").content));
      } else {
        image = req.body;
        if (req.has_param("format")) format = parse_image_format(req.get_param_value("format"));
        if (req.has_param("config")) config = apply_config(Json::parse(req.get_param_value("config")));
      }
      if (image.empty()) throw ValidationError("empty image payload");
      auto grid = std::make_shared<const ScalarGrid>(decode_upload(image, format, raw));
      const auto id = sessions.create(grid, std::move(config));
      auto doc = sessions.state(id);
      send_json(res, 201, doc);
    }));

    http.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, sessions.state(req.matches[1]));
    }));

    http.Post(R"(/sessions/([^/]+)/seeds)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto body = parse_body(req);
      const auto action = body.value("action", std::string());
      const auto rev = client_revision(body);
      MutationOutcome out;
      if (action == "set_primary") {
        out = sessions.set_primary(id, position(body), rev);
      } else if (action == "add_refine") {
        out = sessions.add_refinement(id, position(body), rev);
      } else if (action == "move") {
        out = sessions.move_seed(id, body.value("seed_id", std::string()), position(body), rev);
      } else if (action == "delete") {
        out = sessions.delete_seed(id, body.value("seed_id", std::string()), rev);
      } else {
        throw ValidationError("action must be set_primary, add_refine, move or delete");
      }
      send_json(res, 200, outcome_doc(out));
    }));

    http.Patch(R"(/sessions/([^/]+)/seeds/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      send_json(res, 200, outcome_doc(sessions.move_seed(req.matches[1], req.matches[2], position(body), client_revision(body))));
    }));

    http.Delete(R"(/sessions/([^/]+)/seeds/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      std::optional<std::uint64_t> rev = client_revision(body);
      if (!rev && req.has_param("client_revision")) rev = std::stoull(req.get_param_value("client_revision"));
      send_json(res, 200, outcome_doc(sessions.delete_seed(req.matches[1], req.matches[2], rev)));
    }));

    http.Patch(R"(/sessions/([^/]+)/config)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      const auto rev = client_revision(body);
      body.erase("client_revision");
      send_json(res, 200, outcome_doc(sessions.patch_config(req.matches[1], body, rev)));
    }));

    http.Get(R"(/sessions/([^/]+)/result)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto pub = sessions.result(id);
      const int ndim = sessions.grid(id)->ndim();
      Json doc{{"revision", pub.revision},
               {"current_revision", pub.current_revision},
               {"stale", pub.stale},
               {"result", pub.result ? to_json(*pub.result, ndim) : Json(nullptr)}};
      if (pub.error) {
        doc["error"] = {{"message", *pub.error}, {"revision", pub.error_revision}, {"seed_ids", pub.error_seed_ids}};
      }
      send_json(res, 200, doc);
    }));

    http.Get(R"(/sessions/([^/]+)/image/slice/([^/]+)/(\d+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto grid = sessions.grid(req.matches[1]);
               const auto [lo, hi] = window(req.matches[1], *grid);
               const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
               const auto values = grid->values();
               std::size_t w = 0;
               std::size_t h = 0;
               const auto pixels = extract_slice(grid->geometry(), parse_axis(req.matches[2]),
                                                 std::stoull(req.matches[3]), w, h, [&](std::size_t i) {
                                                   const double v = std::round((values[i] - lo) * scale);
                                                   return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
                                                 });
               const auto png = encode_png_gray8(pixels, w, h);
               res.set_content(std::string(png.begin(), png.end()), "image/png");
             }));

    http.Get(R"(/sessions/([^/]+)/mask/slice/([^/]+)/(\d+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto pub = sessions.result(req.matches[1]);
               if (!pub.result) throw NotFoundError("no result yet");
               const auto& mask = pub.result->mask;
               std::size_t w = 0;
               std::size_t h = 0;
               const auto pixels = extract_slice(mask.geometry, parse_axis(req.matches[2]), std::stoull(req.matches[3]), w,
                                                 h, [&](std::size_t i) -> std::uint8_t { return mask.labels[i] ? 255 : 0; });
               const auto png = encode_png_gray8(pixels, w, h);
               res.set_header("X-Revision", std::to_string(pub.revision));
               res.set_content(std::string(png.begin(), png.end()), "image/png");
             }));

    http.Delete(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (!sessions.remove(req.matches[1])) throw NotFoundError("unknown session");
      res.status = 204;
    }));
  }
};

SessionServer::SessionServer(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {}

SessionServer::~SessionServer() { stop(); }

int SessionServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
  } else if (!impl_->http.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return bound;
}

void SessionServer::run(const std::string& host, int port) {
  if (!impl_->http.listen(host, port)) throw IoError("cannot serve on " + host + ":" + std::to_string(port));
}

void SessionServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace refcut
