#include "refcut/evalbench.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "refcut/error.hpp"

namespace refcut {

double dice(const Mask& a, const Mask& b) {
  if (!a.geometry.same_lattice(b.geometry) || a.labels.size() != b.labels.size()) {
    throw ValidationError("dice: mask dimensions differ");
  }
  std::size_t na = 0;
  std::size_t nb = 0;
  std::size_t both = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool x = a.labels[i] != 0;
    const bool y = b.labels[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

MinCutOracle brute_force_min_cut(const FlowNetwork& net) {
  const int n = net.node_count();
  if (n > kMaxOracleNodes) {
    throw ValidationError("brute_force_min_cut supports at most " + std::to_string(kMaxOracleNodes) + " nodes");
  }
  MinCutOracle best;
  const auto on_source = [](std::uint32_t subset, NodeId v) {
    if (v == kSource) return true;
    if (v == kSink) return false;
    return ((subset >> v) & 1U) != 0;
  };
  const std::uint32_t total = 1U << n;
  for (std::uint32_t subset = 0; subset < total; ++subset) {
    double value = 0.0;
    bool crosses_infinite = false;
    for (const auto& arc : net.arcs()) {
      if (on_source(subset, arc.from) && !on_source(subset, arc.to)) {
        if (arc.capacity.is_infinite()) {
          crosses_infinite = true;
          break;
        }
        value += arc.capacity.value();
      }
    }
    if (crosses_infinite) continue;
    if (!best.feasible || value < best.value) {
      best.feasible = true;
      best.value = value;
      best.side.assign(static_cast<std::size_t>(n), Side::sink);
      for (int v = 0; v < n; ++v) {
        if (on_source(subset, v)) best.side[static_cast<std::size_t>(v)] = Side::source;
      }
    }
  }
  return best;
}

BoundaryOracle brute_force_boundary(const RayGeometry& geom, const CostField& cost, const BuildConfig& cfg) {
  const int rays = geom.ray_count;
  const int nodes = geom.nodes_per_ray;
  if (rays < 1 || rays > kMaxOracleRays || nodes < 1 || nodes > kMaxOracleDepth) {
    throw ValidationError("brute_force_boundary supports R <= 4 and N <= 6");
  }
  if (cost.rays != rays || cost.nodes != nodes) throw ValidationError("cost field does not match the geometry");

  // ray_cost[r][b]: capacity of the terminal arcs cut on ray r when depths 0..b are inside.
  std::vector<std::vector<double>> ray_cost(static_cast<std::size_t>(rays), std::vector<double>(static_cast<std::size_t>(nodes), 0.0));
  for (int r = 0; r < rays; ++r) {
    for (int b = 0; b < nodes; ++b) {
      double c = 0.0;
      for (int k = 1; k < nodes; ++k) {
        const double w = cost.node_cost[static_cast<std::size_t>(r * nodes + k)] -
                         cost.node_cost[static_cast<std::size_t>(r * nodes + k - 1)];
        if (k <= b && w > 0.0) c += w;
        if (k > b && w < 0.0) c += -w;
      }
      ray_cost[static_cast<std::size_t>(r)][static_cast<std::size_t>(b)] = c;
    }
  }

  BoundaryOracle best;
  bool found = false;
  std::vector<int> b(static_cast<std::size_t>(rays), 0);
  while (true) {
    bool feasible = true;
    for (const auto& [p, q] : geom.adjacency) {
      if (std::abs(b[static_cast<std::size_t>(p)] - b[static_cast<std::size_t>(q)]) > cfg.delta) {
        feasible = false;
        break;
      }
    }
    if (feasible) {
      double total = 0.0;
      for (int r = 0; r < rays; ++r) total += ray_cost[static_cast<std::size_t>(r)][static_cast<std::size_t>(b[static_cast<std::size_t>(r)])];
      if (!found || total < best.cost) {
        found = true;
        best.cost = total;
        best.boundary = b;
      }
    }
    // Odometer with ray 0 most significant, so vectors come in lexicographic order.
    int pos = rays - 1;
    while (pos >= 0 && ++b[static_cast<std::size_t>(pos)] == nodes) {
      b[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return best;
}

std::vector<BenchConfig> default_bench_configs() { return {{30, 30}, {300, 30}, {300, 300}}; }

MachineInfo describe_machine() {
  MachineInfo info;
  std::ifstream cpuinfo("/proc/cpuinfo");
  for (std::string line; std::getline(cpuinfo, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) info.cpu_model = line.substr(colon + 2);
      break;
    }
  }
  if (info.cpu_model.empty()) info.cpu_model = "unknown";
  info.hardware_threads = std::thread::hardware_concurrency();
#if defined(__clang__)
  info.compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  info.compiler = "gcc " __VERSION__;
#else
  info.compiler = "unknown";
#endif
#ifdef NDEBUG
  info.build_type = "optimized";
#else
  info.build_type = "debug";
#endif
  return info;
}

std::optional<double> latency_budget_ms(std::size_t node_count) {
  switch (node_count) {
    case 900: return 90.0;
    case 9'000: return 300.0;
    case 90'000: return 500.0;
    default: return std::nullopt;
  }
}

std::optional<double> latency_target_ms(std::size_t node_count) {
  switch (node_count) {
    case 900: return 30.0;
    case 9'000: return 100.0;
    case 90'000: return 130.0;
    case 900'000: return 1000.0;
    default: return std::nullopt;
  }
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

double mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

template <typename F>
PhaseTiming reduce(const std::vector<PhaseTiming>& runs, F f) {
  const auto pick = [&](double PhaseTiming::*field) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& t : runs) v.push_back(t.*field);
    return f(std::move(v));
  };
  return {pick(&PhaseTiming::rays_ms),     pick(&PhaseTiming::sampling_ms), pick(&PhaseTiming::assembly_ms),
          pick(&PhaseTiming::solve_ms),    pick(&PhaseTiming::extraction_ms), pick(&PhaseTiming::total_ms)};
}

}  // namespace

BenchmarkReport run_benchmark(std::shared_ptr<const ScalarGrid> grid, const Template& shape,
                              const std::vector<BenchConfig>& configs, const BenchOptions& options) {
  if (!grid) throw ValidationError("benchmark needs an image");
  if (options.repetitions < 10) throw ValidationError("benchmark needs at least 10 repetitions");
  if (!(options.jitter_mm >= 0.0)) throw ValidationError("jitter must be >= 0");
  BenchmarkReport report;
  report.machine = describe_machine();
  report.template_name = std::string(to_string(shape.kind()));
  report.delta = options.delta;

  std::mt19937_64 rng(options.rng_seed);
  std::uniform_real_distribution<double> jitter(-options.jitter_mm, options.jitter_mm);
  const int ndim = grid->ndim();

  for (const auto& cfg : configs) {
    SegmentationRequest req;
    req.grid = grid;
    req.shape = shape;
    req.config.delta = options.delta;
    req.config.rays = cfg.rays;
    req.config.nodes_per_ray = cfg.nodes;
    req.config.validate();

    req.primary_seed = options.center;
    (void)segment(req);  // warm-up, not recorded

    std::vector<PhaseTiming> runs;
    runs.reserve(static_cast<std::size_t>(options.repetitions));
    for (int rep = 0; rep < options.repetitions; ++rep) {
      req.primary_seed = options.center;
      for (int a = 0; a < ndim; ++a) req.primary_seed[a] += jitter(rng);
      runs.push_back(segment(req).timing);
    }

    BenchmarkRow row;
    row.rays = cfg.rays;
    row.nodes = cfg.nodes;
    row.node_count = static_cast<std::size_t>(cfg.rays) * static_cast<std::size_t>(cfg.nodes);
    if (ndim == 3) {
      const int lat = std::max(2, cfg.rays / 2);
      row.node_count *= static_cast<std::size_t>(lat);
    }
    row.repetitions = options.repetitions;
    row.median = reduce(runs, [](std::vector<double> v) { return median(std::move(v)); });
    row.mean = reduce(runs, [](std::vector<double> v) { return mean(v); });
    row.budget_ms = latency_budget_ms(row.node_count);
    row.target_ms = latency_target_ms(row.node_count);
    report.rows.push_back(row);
  }
  return report;
}

namespace {

std::string opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s << *v;
  return s.str();
}

}  // namespace

void write_csv(const BenchmarkReport& report, std::ostream& out) {
  out << "rays,nodes,node_count,repetitions,median_total_ms,mean_total_ms,"
         "median_rays_ms,median_sampling_ms,median_assembly_ms,median_solve_ms,median_extraction_ms,"
         "mean_rays_ms,mean_sampling_ms,mean_assembly_ms,mean_solve_ms,mean_extraction_ms,budget_ms,target_ms\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : report.rows) {
    out << r.rays << ',' << r.nodes << ',' << r.node_count << ',' << r.repetitions << ',' << r.median.total_ms << ','
        << r.mean.total_ms << ',' << r.median.rays_ms << ',' << r.median.sampling_ms << ',' << r.median.assembly_ms
        << ',' << r.median.solve_ms << ',' << r.median.extraction_ms << ',' << r.mean.rays_ms << ','
        << r.mean.sampling_ms << ',' << r.mean.assembly_ms << ',' << r.mean.solve_ms << ',' << r.mean.extraction_ms
        << ',' << opt(r.budget_ms) << ',' << opt(r.target_ms) << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

void write_summary(const BenchmarkReport& report, std::ostream& out) {
  out << "machine: " << report.machine.cpu_model << " (" << report.machine.hardware_threads << " threads, "
      << report.machine.compiler << ", " << report.machine.build_type << ")\n";
  out << "template: " << report.template_name << ", delta " << report.delta << "\n";
  out << std::left << std::setw(8) << "rays" << std::setw(8) << "nodes" << std::setw(10) << "lattice" << std::setw(6)
      << "reps" << std::setw(12) << "median ms" << std::setw(12) << "mean ms" << std::setw(12) << "solve ms"
      << "budget / goal\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& r : report.rows) {
    out << std::setw(8) << r.rays << std::setw(8) << r.nodes << std::setw(10) << r.node_count << std::setw(6)
        << r.repetitions << std::setw(12) << r.median.total_ms << std::setw(12) << r.mean.total_ms << std::setw(12)
        << r.median.solve_ms;
    if (r.budget_ms) out << (r.median.total_ms <= *r.budget_ms ? "within " : "OVER ") << *r.budget_ms;
    if (r.target_ms) out << (r.budget_ms ? " / " : "") << (r.median.total_ms <= *r.target_ms ? "met " : "missed ") << *r.target_ms;
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
  out << std::right;
}

}  // namespace refcut
