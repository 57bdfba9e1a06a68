#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace refcut {

/// Arc capacity: a finite non-negative real or the symbolic infinity. Infinity
/// is IEEE +inf internally, so it absorbs any finite update and never saturates.
class Capacity {
 public:
  constexpr Capacity() = default;

  static Capacity finite(double value);
  static constexpr Capacity infinite() { return Capacity(std::numeric_limits<double>::infinity()); }

  constexpr bool is_infinite() const { return value_ == std::numeric_limits<double>::infinity(); }
  constexpr double value() const { return value_; }

  friend constexpr bool operator==(Capacity, Capacity) = default;

 private:
  explicit constexpr Capacity(double v) : value_(v) {}
  double value_ = 0.0;
};

/// Node ids are dense in [0, node_count); terminals use these sentinels.
using NodeId = std::int32_t;
inline constexpr NodeId kSource = -1;
inline constexpr NodeId kSink = -2;

struct Arc {
  NodeId from = kSource;
  NodeId to = kSink;
  Capacity capacity;

  friend bool operator==(const Arc&, const Arc&) = default;
};

class FlowNetwork {
 public:
  FlowNetwork() = default;
  explicit FlowNetwork(NodeId node_count);

  NodeId node_count() const { return node_count_; }
  const std::vector<Arc>& arcs() const { return arcs_; }

  /// Throws ValidationError for arcs into the source, out of the sink, or with
  /// endpoints outside the node range.
  void add_arc(NodeId from, NodeId to, Capacity capacity);
  void reserve(std::size_t arc_count) { arcs_.reserve(arc_count); }

  friend bool operator==(const FlowNetwork&, const FlowNetwork&) = default;

 private:
  NodeId node_count_ = 0;
  std::vector<Arc> arcs_;
};

/// Arc selector for removal: the first arc with these endpoints.
struct ArcRef {
  NodeId from;
  NodeId to;
};

/// Returns a copy of `net` with `removed` arcs dropped (first match each) and
/// `extra` arcs appended. Throws ValidationError if a removed arc does not exist.
FlowNetwork rebuild_with(const FlowNetwork& net, const std::vector<Arc>& extra, const std::vector<ArcRef>& removed);

enum class Side : std::uint8_t { source, sink };

struct CutLabels {
  std::vector<Side> side;
  double flow_value = 0.0;
};

enum class Solver {
  /// Two search trees with grow / augment / adopt phases.
  augmenting_tree,
  /// Shortest augmenting paths by breadth-first search; kept for differential testing.
  augmenting_path,
};

/// Exact maximum flow plus the canonical minimal source set (nodes reachable
/// from the source in the final residual graph). Throws InfeasibleCutError when
/// an augmenting path consists of infinite arcs only.
CutLabels max_flow(const FlowNetwork& net, Solver solver = Solver::augmenting_tree);

/// Total capacity of arcs leaving the source side; +inf if an infinite arc crosses.
double cut_capacity(const FlowNetwork& net, const std::vector<Side>& side);

/// Debug dump, one `arc FROM TO CAP` line per arc (SOURCE = -1, SINK = -2,
/// infinite capacity written as `inf`), preceded by `nodes N`.
void write_dump(const FlowNetwork& net, std::ostream& out);
FlowNetwork read_dump(std::istream& in);

}  // namespace refcut
