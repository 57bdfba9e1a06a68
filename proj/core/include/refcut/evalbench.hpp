#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "refcut/cutbuilder.hpp"
#include "refcut/flownet.hpp"
#include "refcut/imaging.hpp"
#include "refcut/segmenter.hpp"
#include "refcut/templates.hpp"

namespace refcut {

/// 2|A n B| / (|A| + |B|); 1.0 when both masks are empty. Throws ValidationError
/// when the lattices differ.
double dice(const Mask& a, const Mask& b);

inline constexpr int kMaxOracleNodes = 20;

struct MinCutOracle {
  bool feasible = false;
  double value = 0.0;
  /// Minimising partition; the first one found in subset order on ties.
  std::vector<Side> side;
};

/// Exhaustive minimum over all 2^n partitions, skipping those crossed by an
/// infinite arc. Throws ValidationError for more than kMaxOracleNodes nodes.
MinCutOracle brute_force_min_cut(const FlowNetwork& net);

inline constexpr int kMaxOracleRays = 4;
inline constexpr int kMaxOracleDepth = 6;

struct BoundaryOracle {
  std::vector<int> boundary;
  double cost = 0.0;
};

/// Enumerates all N^R boundary vectors, drops those breaking |b_r - b_s| <= delta
/// on adjacent rays, and returns the cheapest under the terminal weight rule.
/// Ties go to the lexicographically smallest vector.
BoundaryOracle brute_force_boundary(const RayGeometry& geom, const CostField& cost, const BuildConfig& cfg);

struct BenchConfig {
  int rays = 30;
  int nodes = 30;
};

/// The three lattice scales measured by default: 900, 9000 and 90000 nodes.
std::vector<BenchConfig> default_bench_configs();

struct BenchOptions {
  int repetitions = 10;
  int delta = 2;
  /// Primary seeds are drawn uniformly within this distance of `center` per axis.
  double jitter_mm = 1.0;
  std::uint64_t rng_seed = 1;
  Vec3 center{};
};

struct MachineInfo {
  std::string cpu_model;
  unsigned hardware_threads = 0;
  std::string compiler;
  std::string build_type;
};

MachineInfo describe_machine();

struct BenchmarkRow {
  int rays = 0;
  int nodes = 0;
  std::size_t node_count = 0;
  int repetitions = 0;
  PhaseTiming median;
  PhaseTiming mean;
  /// Interactive-latency budget and stretch goal for the measured scales.
  std::optional<double> budget_ms;
  std::optional<double> target_ms;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  MachineInfo machine;
  std::string template_name;
  int delta = 2;
};

/// Budget and stretch goal for 900, 9000, 90000 and 900000 nodes.
std::optional<double> latency_budget_ms(std::size_t node_count);
std::optional<double> latency_target_ms(std::size_t node_count);

/// Runs segment() `repetitions` times per config with jittered primary seeds,
/// strictly sequentially. Throws ValidationError for repetitions < 10.
BenchmarkReport run_benchmark(std::shared_ptr<const ScalarGrid> grid, const Template& shape,
                              const std::vector<BenchConfig>& configs, const BenchOptions& options);

double median(std::vector<double> values);

void write_csv(const BenchmarkReport& report, std::ostream& out);
void write_summary(const BenchmarkReport& report, std::ostream& out);

}  // namespace refcut
