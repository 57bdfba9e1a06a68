// Reads a network dump (file or stdin), solves it with both solvers and the
// exhaustive oracle when small enough, and prints the values side by side.

#include <fstream>
#include <iostream>

#include "refcut/error.hpp"
#include "refcut/evalbench.hpp"
#include "refcut/flownet.hpp"

using namespace refcut;

namespace {

void report(const char* name, const FlowNetwork& net, Solver solver) {
  try {
    const auto labels = max_flow(net, solver);
    std::cout << name << " flow " << labels.flow_value << " source_side";
    for (std::size_t v = 0; v < labels.side.size(); ++v) {
      if (labels.side[v] == Side::source) std::cout << ' ' << v;
    }
    std::cout << '\n';
  } catch (const InfeasibleCutError&) {
    std::cout << name << " infeasible\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 2 || (argc == 2 && (std::string(argv[1]) == "-h" || std::string(argv[1]) == "--help"))) {
    std::cerr << "usage: mincut_oracle [dump-file]   (reads stdin without a file)\n";
    return argc == 2 ? 0 : 2;
  }
  try {
    FlowNetwork net;
    if (argc == 2) {
      std::ifstream in(argv[1]);
      if (!in) throw IoError(std::string("cannot open ") + argv[1]);
      net = read_dump(in);
    } else {
      net = read_dump(std::cin);
    }
    std::cout << "nodes " << net.node_count() << " arcs " << net.arcs().size() << '\n';
    report("tree", net, Solver::augmenting_tree);
    report("path", net, Solver::augmenting_path);
    if (net.node_count() <= kMaxOracleNodes) {
      const auto oracle = brute_force_min_cut(net);
      if (oracle.feasible) {
        std::cout << "oracle cut " << oracle.value << '\n';
      } else {
        std::cout << "oracle infeasible\n";
      }
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
