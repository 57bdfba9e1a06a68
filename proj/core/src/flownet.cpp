#include "refcut/flownet.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "refcut/error.hpp"

namespace refcut {

Capacity Capacity::finite(double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw ValidationError("finite capacity must be a non-negative real, got " + std::to_string(value));
  }
  return Capacity(value);
}

FlowNetwork::FlowNetwork(NodeId node_count) : node_count_(node_count) {
  if (node_count < 0) throw ValidationError("node count must be non-negative");
}

void FlowNetwork::add_arc(NodeId from, NodeId to, Capacity capacity) {
  if (to == kSource) throw ValidationError("arc into SOURCE");
  if (from == kSink) throw ValidationError("arc out of SINK");
  const auto valid = [&](NodeId v) { return v == kSource || v == kSink || (v >= 0 && v < node_count_); };
  if (!valid(from) || !valid(to)) {
    throw ValidationError("arc endpoint out of range: " + std::to_string(from) + " -> " + std::to_string(to));
  }
  arcs_.push_back({from, to, capacity});
}

FlowNetwork rebuild_with(const FlowNetwork& net, const std::vector<Arc>& extra, const std::vector<ArcRef>& removed) {
  std::vector<bool> drop(net.arcs().size(), false);
  for (const auto& ref : removed) {
    bool hit = false;
    for (std::size_t i = 0; i < net.arcs().size(); ++i) {
      const auto& a = net.arcs()[i];
      if (!drop[i] && a.from == ref.from && a.to == ref.to) {
        drop[i] = true;
        hit = true;
        break;
      }
    }
    if (!hit) {
      throw ValidationError("cannot remove nonexistent arc " + std::to_string(ref.from) + " -> " +
                            std::to_string(ref.to));
    }
  }
  FlowNetwork out(net.node_count());
  out.reserve(net.arcs().size() - removed.size() + extra.size());
  for (std::size_t i = 0; i < net.arcs().size(); ++i) {
    if (!drop[i]) {
      const auto& a = net.arcs()[i];
      out.add_arc(a.from, a.to, a.capacity);
    }
  }
  for (const auto& a : extra) out.add_arc(a.from, a.to, a.capacity);
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void throw_infeasible() {
  throw InfeasibleCutError("no finite s-t cut exists: a source-to-sink path uses only infinite arcs");
}

/// Residual graph in compressed adjacency form shared by both solvers.
struct ResidualGraph {
  struct Edge {
    std::int32_t head;
    std::int32_t sister;
    double r_cap;
  };

  std::vector<std::int32_t> first;  // size n + 1
  std::vector<Edge> edges;

  std::int32_t begin(std::int32_t v) const { return first[static_cast<std::size_t>(v)]; }
  std::int32_t end(std::int32_t v) const { return first[static_cast<std::size_t>(v) + 1]; }

  /// `map_endpoint` translates arc endpoints to residual node ids; arcs it maps
  /// to -1 are skipped.
  template <typename Map>
  static ResidualGraph build(const FlowNetwork& net, std::int32_t n, Map map_endpoint) {
    ResidualGraph g;
    g.first.assign(static_cast<std::size_t>(n) + 1, 0);
    for (const auto& a : net.arcs()) {
      const auto u = map_endpoint(a.from);
      const auto v = map_endpoint(a.to);
      if (u < 0 || v < 0 || u == v) continue;
      ++g.first[static_cast<std::size_t>(u) + 1];
      ++g.first[static_cast<std::size_t>(v) + 1];
    }
    for (std::size_t i = 1; i < g.first.size(); ++i) g.first[i] += g.first[i - 1];
    std::vector<std::int32_t> fill(g.first.begin(), g.first.end() - 1);
    g.edges.resize(static_cast<std::size_t>(g.first.back()));
    for (const auto& a : net.arcs()) {
      const auto u = map_endpoint(a.from);
      const auto v = map_endpoint(a.to);
      if (u < 0 || v < 0 || u == v) continue;
      const auto fwd = fill[static_cast<std::size_t>(u)]++;
      const auto rev = fill[static_cast<std::size_t>(v)]++;
      g.edges[static_cast<std::size_t>(fwd)] = {v, rev, a.capacity.value()};
      g.edges[static_cast<std::size_t>(rev)] = {u, fwd, 0.0};
    }
    return g;
  }
};

/// Reachability from `roots` over positive residual capacity.
std::vector<Side> reachable_side(const ResidualGraph& g, std::int32_t node_count, const std::vector<std::int32_t>& roots) {
  std::vector<Side> side(static_cast<std::size_t>(node_count), Side::sink);
  std::vector<std::int32_t> stack;
  for (auto r : roots) {
    if (r < node_count && side[static_cast<std::size_t>(r)] == Side::sink) {
      side[static_cast<std::size_t>(r)] = Side::source;
      stack.push_back(r);
    }
  }
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (auto e = g.begin(u); e < g.end(u); ++e) {
      const auto& edge = g.edges[static_cast<std::size_t>(e)];
      if (edge.r_cap > 0.0 && edge.head < node_count && side[static_cast<std::size_t>(edge.head)] == Side::sink) {
        side[static_cast<std::size_t>(edge.head)] = Side::source;
        stack.push_back(edge.head);
      }
    }
  }
  return side;
}

// ---- augmenting trees ------------------------------------------------------

class TreeSolver {
 public:
  explicit TreeSolver(const FlowNetwork& net) : n_(net.node_count()) {
    graph_ = ResidualGraph::build(net, n_, [](NodeId v) { return v >= 0 ? v : -1; });
    nodes_.resize(static_cast<std::size_t>(n_));
    std::vector<double> to_source(static_cast<std::size_t>(n_), 0.0);
    std::vector<double> to_sink(static_cast<std::size_t>(n_), 0.0);
    for (const auto& a : net.arcs()) {
      const double c = a.capacity.value();
      if (a.from == kSource && a.to == kSink) {
        if (a.capacity.is_infinite()) throw_infeasible();
        flow_ += c;
      } else if (a.from == kSource) {
        to_source[static_cast<std::size_t>(a.to)] += c;
      } else if (a.to == kSink) {
        to_sink[static_cast<std::size_t>(a.from)] += c;
      }
    }
    for (std::size_t v = 0; v < nodes_.size(); ++v) {
      const double s = to_source[v];
      const double t = to_sink[v];
      if (s == kInf && t == kInf) throw_infeasible();
      // Push min(s, t) straight through the node; keep the signed excess.
      flow_ += std::min(s, t);
      nodes_[v].tr_cap = s == kInf ? kInf : (t == kInf ? -kInf : s - t);
    }
  }

  double solve() {
    for (std::int32_t v = 0; v < n_; ++v) {
      auto& node = nodes_[static_cast<std::size_t>(v)];
      if (node.tr_cap != 0.0) {
        node.is_sink = node.tr_cap < 0.0;
        node.parent = kTerminal;
        node.ts = 0;
        node.dist = 1;
        activate(v);
      }
    }

    std::int32_t current = -1;
    while (true) {
      std::int32_t i = current;
      current = -1;
      if (i >= 0 && node(i).parent == kNoParent) i = -1;
      if (i < 0) {
        i = next_active();
        if (i < 0) break;
      }

      const std::int32_t bridge = grow(i);
      ++time_;
      if (bridge >= 0) {
        current = i;
        augment(bridge);
        adopt_orphans();
      }
    }
    return flow_;
  }

  std::vector<Side> labels() const {
    std::vector<std::int32_t> roots;
    for (std::int32_t v = 0; v < n_; ++v) {
      if (nodes_[static_cast<std::size_t>(v)].tr_cap > 0.0) roots.push_back(v);
    }
    return reachable_side(graph_, n_, roots);
  }

 private:
  static constexpr std::int32_t kNoParent = -1;
  static constexpr std::int32_t kTerminal = -2;
  static constexpr std::int32_t kOrphan = -3;
  static constexpr std::int32_t kInfiniteDist = 1 << 30;

  struct Node {
    std::int32_t parent = kNoParent;  // edge from this node towards its parent
    std::int32_t ts = 0;
    std::int32_t dist = 0;
    bool is_sink = false;
    bool queued = false;
    double tr_cap = 0.0;  // > 0: residual from source, < 0: residual to sink
  };

  Node& node(std::int32_t v) { return nodes_[static_cast<std::size_t>(v)]; }
  ResidualGraph::Edge& edge(std::int32_t e) { return graph_.edges[static_cast<std::size_t>(e)]; }

  void activate(std::int32_t v) {
    auto& nd = node(v);
    if (!nd.queued) {
      nd.queued = true;
      active_.push_back(v);
    }
  }

  std::int32_t next_active() {
    while (!active_.empty()) {
      const auto v = active_.front();
      active_.pop_front();
      node(v).queued = false;
      if (node(v).parent != kNoParent) return v;
    }
    return -1;
  }

  /// Expands the tree containing `i`; returns an edge from the source tree to
  /// the sink tree when the trees touch, else -1.
  std::int32_t grow(std::int32_t i) {
    const auto& ni = node(i);
    for (auto e = graph_.begin(i); e < graph_.end(i); ++e) {
      const auto j = edge(e).head;
      const auto sister = edge(e).sister;
      const double residual = ni.is_sink ? edge(sister).r_cap : edge(e).r_cap;
      if (residual <= 0.0) continue;
      auto& nj = node(j);
      if (nj.parent == kNoParent) {
        nj.is_sink = ni.is_sink;
        nj.parent = sister;
        nj.ts = ni.ts;
        nj.dist = ni.dist + 1;
        activate(j);
      } else if (nj.is_sink != ni.is_sink) {
        return ni.is_sink ? sister : e;
      } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
        nj.parent = sister;
        nj.ts = ni.ts;
        nj.dist = ni.dist + 1;
      }
    }
    return -1;
  }

  void make_orphan_front(std::int32_t v) {
    node(v).parent = kOrphan;
    orphans_.push_front(v);
  }

  void make_orphan_rear(std::int32_t v) {
    node(v).parent = kOrphan;
    orphans_.push_back(v);
  }

  void augment(std::int32_t bridge) {
    double bottleneck = edge(bridge).r_cap;
    std::int32_t v = edge(edge(bridge).sister).head;
    for (std::int32_t e = node(v).parent; e != kTerminal; e = node(v).parent) {
      bottleneck = std::min(bottleneck, edge(edge(e).sister).r_cap);
      v = edge(e).head;
    }
    bottleneck = std::min(bottleneck, node(v).tr_cap);
    v = edge(bridge).head;
    for (std::int32_t e = node(v).parent; e != kTerminal; e = node(v).parent) {
      bottleneck = std::min(bottleneck, edge(e).r_cap);
      v = edge(e).head;
    }
    bottleneck = std::min(bottleneck, -node(v).tr_cap);
    if (bottleneck == kInf) throw_infeasible();

    edge(edge(bridge).sister).r_cap += bottleneck;
    edge(bridge).r_cap -= bottleneck;

    v = edge(edge(bridge).sister).head;
    for (std::int32_t e = node(v).parent; e != kTerminal; e = node(v).parent) {
      auto& up = edge(edge(e).sister);
      edge(e).r_cap += bottleneck;
      up.r_cap -= bottleneck;
      const auto next = edge(e).head;
      if (up.r_cap == 0.0) make_orphan_front(v);
      v = next;
    }
    node(v).tr_cap -= bottleneck;
    if (node(v).tr_cap == 0.0) make_orphan_front(v);

    v = edge(bridge).head;
    for (std::int32_t e = node(v).parent; e != kTerminal; e = node(v).parent) {
      edge(edge(e).sister).r_cap += bottleneck;
      edge(e).r_cap -= bottleneck;
      const auto next = edge(e).head;
      if (edge(e).r_cap == 0.0) make_orphan_front(v);
      v = next;
    }
    node(v).tr_cap += bottleneck;
    if (node(v).tr_cap == 0.0) make_orphan_front(v);

    flow_ += bottleneck;
  }

  void adopt_orphans() {
    while (!orphans_.empty()) {
      const auto v = orphans_.front();
      orphans_.pop_front();
      adopt(v);
    }
  }

  /// Finds a new parent for orphan `i` in its own tree, or frees it.
  void adopt(std::int32_t i) {
    const bool sink_tree = node(i).is_sink;
    std::int32_t best = kNoParent;
    std::int32_t best_dist = kInfiniteDist;
    for (auto e = graph_.begin(i); e < graph_.end(i); ++e) {
      // Source tree: flow must be able to come from j into i; sink tree: leave i to j.
      const double residual = sink_tree ? edge(e).r_cap : edge(edge(e).sister).r_cap;
      if (residual <= 0.0) continue;
      const auto j = edge(e).head;
      if (node(j).is_sink != sink_tree || node(j).parent == kNoParent) continue;

      std::int32_t d = 0;
      std::int32_t k = j;
      while (true) {
        auto& nk = node(k);
        if (nk.ts == time_) {
          d += nk.dist;
          break;
        }
        const auto up = nk.parent;
        ++d;
        if (up == kTerminal) {
          nk.ts = time_;
          nk.dist = 1;
          break;
        }
        if (up == kOrphan) {
          d = kInfiniteDist;
          break;
        }
        k = edge(up).head;
      }
      if (d < kInfiniteDist) {
        if (d < best_dist) {
          best = e;
          best_dist = d;
        }
        for (k = j; node(k).ts != time_; k = edge(node(k).parent).head) {
          node(k).ts = time_;
          node(k).dist = d--;
        }
      }
    }

    node(i).parent = best;
    if (best != kNoParent) {
      node(i).ts = time_;
      node(i).dist = best_dist + 1;
      return;
    }
    for (auto e = graph_.begin(i); e < graph_.end(i); ++e) {
      const auto j = edge(e).head;
      auto& nj = node(j);
      if (nj.is_sink != sink_tree || nj.parent == kNoParent) continue;
      const double residual = sink_tree ? edge(e).r_cap : edge(edge(e).sister).r_cap;
      if (residual > 0.0) activate(j);
      if (nj.parent != kTerminal && nj.parent != kOrphan && edge(nj.parent).head == i) make_orphan_rear(j);
    }
  }

  std::int32_t n_;
  ResidualGraph graph_;
  std::vector<Node> nodes_;
  std::deque<std::int32_t> active_;
  std::deque<std::int32_t> orphans_;
  std::int32_t time_ = 0;
  double flow_ = 0.0;
};

// ---- shortest augmenting paths --------------------------------------------

CutLabels solve_by_paths(const FlowNetwork& net) {
  const auto n = net.node_count();
  const std::int32_t s = n;
  const std::int32_t t = n + 1;
  auto g = ResidualGraph::build(net, n + 2, [&](NodeId v) { return v == kSource ? s : (v == kSink ? t : v); });
  double flow = 0.0;
  std::vector<std::int32_t> via(static_cast<std::size_t>(n) + 2);
  std::vector<std::int32_t> queue;
  while (true) {
    std::fill(via.begin(), via.end(), -1);
    queue.assign(1, s);
    via[static_cast<std::size_t>(s)] = -2;
    for (std::size_t q = 0; q < queue.size() && via[static_cast<std::size_t>(t)] == -1; ++q) {
      const auto u = queue[q];
      for (auto e = g.begin(u); e < g.end(u); ++e) {
        const auto& edge = g.edges[static_cast<std::size_t>(e)];
        if (edge.r_cap > 0.0 && via[static_cast<std::size_t>(edge.head)] == -1) {
          via[static_cast<std::size_t>(edge.head)] = e;
          queue.push_back(edge.head);
        }
      }
    }
    if (via[static_cast<std::size_t>(t)] == -1) break;
    double bottleneck = kInf;
    for (auto v = t; v != s;) {
      const auto e = via[static_cast<std::size_t>(v)];
      bottleneck = std::min(bottleneck, g.edges[static_cast<std::size_t>(e)].r_cap);
      v = g.edges[static_cast<std::size_t>(g.edges[static_cast<std::size_t>(e)].sister)].head;
    }
    if (bottleneck == kInf) throw_infeasible();
    for (auto v = t; v != s;) {
      const auto e = via[static_cast<std::size_t>(v)];
      auto& fwd = g.edges[static_cast<std::size_t>(e)];
      fwd.r_cap -= bottleneck;
      g.edges[static_cast<std::size_t>(fwd.sister)].r_cap += bottleneck;
      v = g.edges[static_cast<std::size_t>(fwd.sister)].head;
    }
    flow += bottleneck;
  }
  auto side = reachable_side(g, n + 2, {s});
  side.resize(static_cast<std::size_t>(n));
  return {std::move(side), flow};
}

}  // namespace

CutLabels max_flow(const FlowNetwork& net, Solver solver) {
  if (solver == Solver::augmenting_path) return solve_by_paths(net);
  TreeSolver tree(net);
  const double flow = tree.solve();
  return {tree.labels(), flow};
}

double cut_capacity(const FlowNetwork& net, const std::vector<Side>& side) {
  const auto on_source = [&](NodeId v) {
    return v == kSource || (v >= 0 && side[static_cast<std::size_t>(v)] == Side::source);
  };
  double total = 0.0;
  for (const auto& a : net.arcs()) {
    if (on_source(a.from) && !on_source(a.to)) total += a.capacity.value();
  }
  return total;
}

void write_dump(const FlowNetwork& net, std::ostream& out) {
  const auto precision = out.precision(17);
  out << "nodes " << net.node_count() << '\n';
  for (const auto& a : net.arcs()) {
    out << "arc " << a.from << ' ' << a.to << ' ';
    if (a.capacity.is_infinite()) {
      out << "inf";
    } else {
      out << a.capacity.value();
    }
    out << '\n';
  }
  out.precision(precision);
}

FlowNetwork read_dump(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<FlowNetwork> net;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string tag;
    if (!(fields >> tag) || tag[0] == '#') continue;
    const auto fail = [&](const std::string& why) {
      throw ValidationError("flow dump line " + std::to_string(line_no) + ": " + why);
    };
    if (tag == "nodes") {
      NodeId n = 0;
      if (!(fields >> n) || n < 0) fail("bad node count");
      if (net) fail("duplicate nodes line");
      net.emplace(n);
    } else if (tag == "arc") {
      if (!net) fail("arc before nodes line");
      NodeId from = 0;
      NodeId to = 0;
      std::string cap;
      if (!(fields >> from >> to >> cap)) fail("expected `arc FROM TO CAP`");
      double value = 0.0;
      if (cap != "inf") {
        std::istringstream parse(cap);
        if (!(parse >> value) || !parse.eof()) fail("bad capacity '" + cap + "'");
      }
      net->add_arc(from, to, cap == "inf" ? Capacity::infinite() : Capacity::finite(value));
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  if (!net) throw ValidationError("flow dump has no nodes line");
  return std::move(*net);
}

}  // namespace refcut
