#pragma once

#include <vector>

#include "vmbo/graph.hpp"
#include "vmbo/osstat.hpp"

namespace vmbo::oracle {

struct Optimum {
  double objective = 0;
  Clustering clustering;
};

// Maximum of sum_x u_{c(x)}(x) over all admissible clusterings by enumeration
// (N <= 12, P <= 4).
Optimum exhaustive_optimum(const MatrixXd& u, const VolumeConstraints& constraints);

// Same optimum as a transportation problem: source -> points (capacity 1),
// points -> clusters (cost -u), clusters -> sink (capacity V, or [L, U] via
// lower-bounded arcs). Throws a constraint error if no flow saturates.
Optimum mincostflow_optimum(const MatrixXd& u, const VolumeConstraints& constraints);

// exp(-h (I - D^{-1} W)) from a full eigendecomposition (N <= 200).
MatrixXd dense_heat(const SparseWeights& w, double h);

// Successive shortest paths with node potentials and Dijkstra.
class MinCostFlow {
 public:
  explicit MinCostFlow(int nodes);

  int add_arc(int from, int to, long long capacity, double cost);
  // Sends up to `limit` units from s to t at minimum cost; returns the flow sent.
  long long run(int s, int t, long long limit);

  double cost() const { return cost_; }
  long long flow(int arc) const;

 private:
  struct Arc {
    int to;
    long long cap;
    double cost;
    int rev;
  };

  void initial_potentials(int s);

  std::vector<std::vector<Arc>> g_;
  std::vector<std::pair<int, int>> arcs_;  // (node, position) of forward arcs
  std::vector<long long> original_;
  std::vector<double> pot_;
  double cost_ = 0;
};

}  // namespace vmbo::oracle
