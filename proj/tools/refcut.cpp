// refcut: batch segmentation, phantoms, evaluation, benchmarks and the session server.

#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "refcut/documents.hpp"
#include "refcut/error.hpp"
#include "refcut/evalbench.hpp"
#include "refcut/imaging.hpp"
#include "refcut/segmenter.hpp"
#include "refcut/service.hpp"

namespace fs = std::filesystem;
using namespace refcut;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream in(text);
  for (std::string part; std::getline(in, part, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ValidationError(what + ": '" + text + "' is not a comma-separated list of numbers");
    }
  }
  return out;
}

Vec3 parse_point(const std::string& text, const std::string& what, int ndim) {
  const auto v = parse_list(text, what);
  if (static_cast<int>(v.size()) != ndim) {
    throw ValidationError(what + " needs " + std::to_string(ndim) + " coordinates, got '" + text + "'");
  }
  Vec3 p{};
  for (int a = 0; a < ndim; ++a) p[a] = v[static_cast<std::size_t>(a)];
  return p;
}

Vec3 to_world(const Vec3& voxel, const GridGeometry& g) {
  Vec3 p{};
  for (int a = 0; a < g.ndim; ++a) p[a] = g.origin[a] + voxel[a] * g.spacing[a];
  return p;
}

Template load_template(const std::string& spec) {
  if (fs::is_regular_file(spec)) {
    std::ifstream in(spec);
    try {
      return template_from_json(Json::parse(in));
    } catch (const Json::exception& e) {
      throw ValidationError("template file " + spec + ": " + e.what());
    }
  }
  return parse_template_spec(spec);
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw ValidationError(what + " not found: " + path);
}

void write_json(const Json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path);
}

struct SegmentArgs {
  std::string image;
  std::string format;
  std::string templ;
  std::string config;
  std::string seed;
  std::vector<std::string> refine;
  std::optional<int> delta;
  std::optional<int> rays;
  std::optional<int> nodes;
  std::optional<int> latitudes;
  std::optional<double> mean_radius;
  bool voxel_coords = false;
  bool path_solver = false;
  std::string out_mask;
  std::string out_contour;
  std::string out_result;
  std::string truth;
};

int cmd_segment(const SegmentArgs& a) {
  require_file(a.image, "image");
  auto grid = std::make_shared<const ScalarGrid>(a.format.empty() ? load_grid(a.image)
                                                                  : load_grid(a.image, parse_image_format(a.format)));
  const auto& g = grid->geometry();

  ConfigDocument cfg;
  if (!a.config.empty()) {
    require_file(a.config, "config");
    std::ifstream in(a.config);
    try {
      cfg = apply_config(Json::parse(in));
    } catch (const Json::exception& e) {
      throw ValidationError("config " + a.config + ": " + e.what());
    }
  }
  if (a.delta) cfg.config.delta = *a.delta;
  if (a.rays) cfg.config.rays = *a.rays;
  if (a.nodes) cfg.config.nodes_per_ray = *a.nodes;
  if (a.latitudes) cfg.config.latitudes = *a.latitudes;
  if (a.mean_radius) cfg.config.mean_radius_mm = *a.mean_radius;
  if (!a.templ.empty()) cfg.shape = load_template(a.templ);
  if (!cfg.shape) cfg.shape = default_template(g);
  cfg.config.validate();

  SegmentationRequest req;
  req.grid = grid;
  req.shape = *cfg.shape;
  req.config = cfg.config;
  req.solver = a.path_solver ? Solver::augmenting_path : Solver::augmenting_tree;
  req.primary_seed = parse_point(a.seed, "--seed", g.ndim);
  if (a.voxel_coords) req.primary_seed = to_world(req.primary_seed, g);
  int n = 0;
  for (const auto& text : a.refine) {
    RefinementSeed s;
    s.id = "r" + std::to_string(++n);
    s.position = parse_point(text, "--refine", g.ndim);
    if (a.voxel_coords) s.position = to_world(s.position, g);
    req.refinements.push_back(s);
  }

  const auto result = segment(req);

  if (!a.out_mask.empty()) save_mask(result.mask, a.out_mask, format_from_path(a.out_mask));
  if (!a.out_contour.empty()) write_json(to_json(result.contour, g.ndim), a.out_contour);
  if (!a.out_result.empty()) {
    auto doc = to_json(result, g.ndim);
    doc["config"] = to_json(cfg.config, cfg.shape);
    write_json(doc, a.out_result);
  }

  const auto& t = result.timing;
  std::cout << std::fixed << std::setprecision(3);
  std::cout << "lattice " << result.boundary.size() << " rays x " << cfg.config.nodes_per_ray << " nodes, mu "
            << result.mu << ", flow " << result.flow_value << "\n";
  std::cout << "timing ms: rays " << t.rays_ms << ", sampling " << t.sampling_ms << ", assembly " << t.assembly_ms
            << ", solve " << t.solve_ms << ", extraction " << t.extraction_ms << ", total " << t.total_ms << "\n";
  std::cout << "mask voxels " << result.mask.count() << "\n";
  if (!a.truth.empty()) {
    require_file(a.truth, "truth mask");
    std::cout << std::setprecision(6) << "DSC " << dice(result.mask, load_mask(a.truth)) << "\n";
  }
  return kExitOk;
}

struct PhantomArgs {
  std::string kind = "disc";
  std::string dims = "64,64";
  std::string spacing;
  std::string center;
  std::string radius = "20";
  double fg = 200.0;
  double bg = 50.0;
  double noise = 0.0;
  std::uint64_t rng_seed = 1;
  std::string out_image;
  std::string out_mask;
};

int cmd_phantom(const PhantomArgs& a) {
  PhantomSpec spec;
  spec.kind = parse_phantom_kind(a.kind);
  const auto dims = parse_list(a.dims, "--dims");
  spec.dims.clear();
  for (double d : dims) {
    if (d < 1.0 || d != std::floor(d)) throw ValidationError("--dims must be positive integers");
    spec.dims.push_back(static_cast<std::size_t>(d));
  }
  spec.spacing = a.spacing.empty() ? std::vector<double>(spec.dims.size(), 1.0) : parse_list(a.spacing, "--spacing");
  spec.radius_or_halfextent = parse_list(a.radius, "--radius");
  spec.fg_intensity = a.fg;
  spec.bg_intensity = a.bg;
  spec.noise_sigma = a.noise;
  const int ndim = static_cast<int>(spec.dims.size());
  if (a.center.empty()) {
    for (int i = 0; i < ndim && i < static_cast<int>(spec.spacing.size()); ++i) {
      spec.center[i] = 0.5 * static_cast<double>(spec.dims[static_cast<std::size_t>(i)] - 1) *
                       spec.spacing[static_cast<std::size_t>(i)];
    }
  } else {
    spec.center = parse_point(a.center, "--center", ndim);
  }
  const auto phantom = make_phantom(spec, a.rng_seed);
  if (!a.out_image.empty()) save_grid(phantom.grid, a.out_image, format_from_path(a.out_image));
  if (!a.out_mask.empty()) save_mask(phantom.truth, a.out_mask, format_from_path(a.out_mask));
  std::cout << "phantom " << a.kind << ": " << phantom.truth.count() << " foreground voxels\n";
  return kExitOk;
}

int cmd_eval(const std::string& a, const std::string& b) {
  require_file(a, "mask");
  require_file(b, "mask");
  std::cout << std::fixed << std::setprecision(6) << dice(load_mask(a), load_mask(b)) << "\n";
  return kExitOk;
}

struct BenchArgs {
  std::string image;
  std::string templ = "rectangle:80x80";
  std::string configs;
  int reps = 10;
  int delta = 2;
  std::uint64_t rng_seed = 1;
  std::string out;
};

std::vector<BenchConfig> parse_configs(const std::string& text) {
  if (text.empty()) return default_bench_configs();
  std::vector<BenchConfig> out;
  std::stringstream in(text);
  for (std::string part; std::getline(in, part, ',');) {
    const auto x = part.find('x');
    try {
      if (x == std::string::npos) throw std::invalid_argument(part);
      out.push_back({std::stoi(part.substr(0, x)), std::stoi(part.substr(x + 1))});
    } catch (const std::exception&) {
      throw ValidationError("--configs expects RxN pairs such as 30x30,300x30");
    }
  }
  return out;
}

int cmd_bench(const BenchArgs& a) {
  if (a.reps < 10) throw ValidationError("--reps must be at least 10");
  const auto configs = parse_configs(a.configs);
  const auto shape = load_template(a.templ);

  std::shared_ptr<const ScalarGrid> grid;
  BenchOptions opt;
  opt.repetitions = a.reps;
  opt.delta = a.delta;
  opt.rng_seed = a.rng_seed;
  if (a.image.empty()) {
    // Default scene: a square object slightly smaller than the 80 mm template.
    PhantomSpec spec;
    spec.kind = shape.ndim() == 3 ? PhantomKind::box : PhantomKind::rectangle;
    spec.dims = shape.ndim() == 3 ? std::vector<std::size_t>{96, 96, 96} : std::vector<std::size_t>{128, 128};
    spec.spacing.assign(spec.dims.size(), 1.0);
    for (int i = 0; i < shape.ndim(); ++i) spec.center[i] = 0.5 * static_cast<double>(spec.dims[static_cast<std::size_t>(i)] - 1);
    spec.radius_or_halfextent = {30.0};
    spec.noise_sigma = 5.0;
    grid = std::make_shared<const ScalarGrid>(make_phantom(spec, a.rng_seed).grid);
    opt.center = spec.center;
  } else {
    require_file(a.image, "image");
    grid = std::make_shared<const ScalarGrid>(load_grid(a.image));
    const auto& g = grid->geometry();
    for (int i = 0; i < g.ndim; ++i) opt.center[i] = g.origin[i] + 0.5 * static_cast<double>(g.dims[i] - 1) * g.spacing[i];
  }

  if (!a.out.empty()) {
    // Fail on an unwritable destination before spending time on measurements.
    std::ofstream probe(a.out, std::ios::app);
    if (!probe) throw IoError("cannot write " + a.out);
  }

  const auto report = run_benchmark(grid, shape, configs, opt);
  write_summary(report, std::cout);
  if (!a.out.empty()) {
    write_json(to_json(report), a.out);
    auto csv_path = fs::path(a.out).replace_extension(".csv");
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    write_csv(report, csv);
  } else {
    write_csv(report, std::cout);
  }
  return kExitOk;
}

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

int cmd_serve(const std::string& host, int port, int idle_minutes, unsigned workers) {
  if (port < 0 || port > 65535) throw ValidationError("--port must be in [0, 65535]");
  if (idle_minutes < 1) throw ValidationError("--idle-minutes must be >= 1");
  SessionOptions opt;
  opt.idle_timeout = std::chrono::minutes(idle_minutes);
  opt.workers = workers;
  SessionManager sessions(opt);
  SessionServer server(sessions);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int bound = server.start(host, port);
  std::cout << "listening on http://" << host << ":" << bound << std::endl;
  while (!g_stop) pause();
  server.stop();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"refcut: template-based ray-graph segmentation with refinement seeds"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  SegmentArgs seg;
  auto* segment_cmd = app.add_subcommand("segment", "Segment an image from a primary seed");
  segment_cmd->add_option("--image", seg.image, "Input image (.pgm, .png, .mhd)")->required();
  segment_cmd->add_option("--format", seg.format, "Override the image format: pgm, png or mhd");
  segment_cmd->add_option("--template", seg.templ,
                          "Template: circle:D, sphere:D, rectangle:WxH, cube:XxYxZ, triangle:x,y;x,y;x,y, "
                          "polygon:..., or a JSON template file (default: circle or sphere of half the smallest extent)");
  segment_cmd->add_option("--config", seg.config, "JSON config document (flags override it)");
  segment_cmd->add_option("--seed", seg.seed, "Primary seed, x,y or x,y,z in mm")->required();
  segment_cmd->add_option("--refine", seg.refine, "Refinement seed in mm (repeatable)")->take_all();
  segment_cmd->add_option("--delta", seg.delta, "Smoothness: max depth difference between neighbouring rays");
  segment_cmd->add_option("--rays", seg.rays, "Rays (2D) or rays per latitude row (3D)");
  segment_cmd->add_option("--nodes", seg.nodes, "Nodes per ray");
  segment_cmd->add_option("--latitudes", seg.latitudes, "3D latitude rows (default rays/2)");
  segment_cmd->add_option("--mean-radius", seg.mean_radius, "Radius in mm of the mean-intensity ball");
  segment_cmd->add_flag("--voxel-coords", seg.voxel_coords, "Seeds are voxel indices instead of mm");
  segment_cmd->add_flag("--path-solver", seg.path_solver, "Use the shortest-augmenting-path solver");
  segment_cmd->add_option("--out-mask", seg.out_mask, "Write the mask (.pgm or .mhd)");
  segment_cmd->add_option("--out-contour", seg.out_contour, "Write the contour document (JSON)");
  segment_cmd->add_option("--out-result", seg.out_result, "Write the full result document (JSON)");
  segment_cmd->add_option("--truth", seg.truth, "Reference mask; prints the DSC against it");

  PhantomArgs ph;
  auto* phantom_cmd = app.add_subcommand("phantom", "Generate a synthetic phantom and its truth mask");
  phantom_cmd->add_option("--kind", ph.kind, "disc, sphere, rectangle or box")->capture_default_str();
  phantom_cmd->add_option("--dims", ph.dims, "Grid extents, e.g. 64,64 or 48,48,48")->capture_default_str();
  phantom_cmd->add_option("--spacing", ph.spacing, "Voxel spacing in mm (default 1)");
  phantom_cmd->add_option("--center", ph.center, "Object centre in mm (default grid centre)");
  phantom_cmd->add_option("--radius", ph.radius, "Radius, or half extents a,b[,c] for rectangle/box")->capture_default_str();
  phantom_cmd->add_option("--fg", ph.fg, "Foreground intensity")->capture_default_str();
  phantom_cmd->add_option("--bg", ph.bg, "Background intensity")->capture_default_str();
  phantom_cmd->add_option("--noise", ph.noise, "Gaussian noise sigma")->capture_default_str();
  phantom_cmd->add_option("--rng-seed", ph.rng_seed, "Noise seed")->capture_default_str();
  phantom_cmd->add_option("--out-image", ph.out_image, "Write the image (.pgm, .png, .mhd)");
  phantom_cmd->add_option("--out-mask", ph.out_mask, "Write the truth mask (.pgm, .mhd)");

  std::string mask_a;
  std::string mask_b;
  auto* eval_cmd = app.add_subcommand("eval", "Print the Dice similarity of two masks");
  eval_cmd->add_option("mask_a", mask_a, "First mask")->required();
  eval_cmd->add_option("mask_b", mask_b, "Second mask")->required();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Latency benchmark over lattice sizes");
  bench_cmd->add_option("--image", bench.image, "Image to segment (default: generated square phantom)");
  bench_cmd->add_option("--template", bench.templ, "Template spec")->capture_default_str();
  bench_cmd->add_option("--configs", bench.configs, "RxN list, default 30x30,300x30,300x300");
  bench_cmd->add_option("--reps", bench.reps, "Repetitions per config (>= 10)")->capture_default_str();
  bench_cmd->add_option("--delta", bench.delta, "Smoothness constraint")->capture_default_str();
  bench_cmd->add_option("--rng-seed", bench.rng_seed, "Seed for jittered primary seeds")->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "Write the JSON report here and the CSV table next to it");

  std::string host = "127.0.0.1";
  int port = 8080;
  int idle_minutes = 30;
  unsigned workers = 0;
  auto* serve_cmd = app.add_subcommand("serve", "Run the interactive session service");
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
  serve_cmd->add_option("--idle-minutes", idle_minutes, "Session idle expiry")->capture_default_str();
  serve_cmd->add_option("--workers", workers, "Recompute threads (0 = hardware threads)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*segment_cmd) return cmd_segment(seg);
    if (*phantom_cmd) return cmd_phantom(ph);
    if (*eval_cmd) return cmd_eval(mask_a, mask_b);
    if (*bench_cmd) return cmd_bench(bench);
    if (*serve_cmd) return cmd_serve(host, port, idle_minutes, workers);
  } catch (const InfeasibleRefinementError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << "conflicting seeds:";
    for (const auto& id : e.seed_ids()) std::cerr << ' ' << id;
    std::cerr << "\n";
    return kExitRuntime;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
