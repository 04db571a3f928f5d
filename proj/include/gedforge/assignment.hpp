#pragma once

#include <functional>
#include <vector>

#include "gedforge/exact.hpp"
#include "gedforge/graph.hpp"

namespace gedforge {

// Square cost matrix. Forbidden pairings carry a large finite sentinel chosen
// above n * (max regular entry), so a fully finite perfect matching is always
// preferred when one exists.
struct CostMatrix {
  int n = 0;
  std::vector<double> cells;  // row-major
  double sentinel = 0.0;      // 0 when the matrix has no forbidden cells

  CostMatrix() = default;
  explicit CostMatrix(int size, double fill = 0.0)
      : n(size), cells(static_cast<std::size_t>(size) * size, fill) {}
  double& at(int i, int j) { return cells[static_cast<std::size_t>(i) * n + j]; }
  double at(int i, int j) const { return cells[static_cast<std::size_t>(i) * n + j]; }
};

struct Assignment {
  std::vector<int> perm;  // perm[i] = column matched to row i, a bijection
  double total_cost = 0.0;
};

// Potential-based O(n^3) solver; globally optimal.
Assignment solve_lap_hungarian(const CostMatrix& c);

// Shortest-augmenting-path solver (column reduction, reduction transfer, two
// augmenting row reduction sweeps, Dijkstra augmentation); same optimum as
// the Hungarian solver, possibly a different permutation under ties.
Assignment solve_lap_jv(const CostMatrix& c);

// kLabelOnly scores node substitutions by label mismatch alone; kAugmented adds
// the incident-edge mismatch to substitutions and charges deletions and
// insertions for their incident edges, which tightens the resulting bound.
enum class CostModel { kLabelOnly, kAugmented };

enum class LapSolver { kHungarian, kJv };

// (N1+N2) x (N1+N2) block matrix: substitutions top-left, node deletions on
// the top-right diagonal, insertions on the bottom-left diagonal, zeros in
// the bottom-right corner. Off-diagonal deletion/insertion cells hold the
// sentinel.
CostMatrix build_ged_cost_matrix(const LabeledGraph& g1, const LabeledGraph& g2,
                                 CostModel model = CostModel::kAugmented);

// Upper bound: the LAP solution over build_ged_cost_matrix is read back as a
// node alignment and priced by its induced edit path, never by the raw LAP
// objective, so the result is always >= the exact distance.
GedResult ged_bipartite(const LabeledGraph& g1, const LabeledGraph& g2,
                        LapSolver solver = LapSolver::kHungarian,
                        CostModel model = CostModel::kAugmented);

// Hausdorff-style lower bound from one-sided half-cost minima; quadratic in
// the node counts and never above the exact distance. Distances come out in
// halves, hence the fractional return type.
GedResult ged_hed(const LabeledGraph& g1, const LabeledGraph& g2);

struct FlowMatrix {
  int n1 = 0, n2 = 0;
  std::vector<double> flows;  // row-major n1 x n2
  double at(int i, int j) const { return flows[static_cast<std::size_t>(i) * n2 + j]; }
};

struct TransportPlan {
  FlowMatrix flow;
  double cost = 0.0;
};

using Embedding = std::vector<double>;

// Moves uniform mass 1/N1 per x row onto 1/N2 per y row at L2 transport
// costs. Solved exactly as integral min-cost flow on costs scaled to 1e-12
// resolution; the reported cost re-prices the plan with unscaled distances.
TransportPlan solve_transportation(const std::vector<Embedding>& x,
                                   const std::vector<Embedding>& y);

using BaseKernel = std::function<double(const Embedding&, const Embedding&)>;

// Maximum total base-kernel similarity over bijections, zero-padding the
// smaller side (padded elements have similarity 0 to everything).
double assignment_kernel(const std::vector<Embedding>& x, const std::vector<Embedding>& y,
                         const BaseKernel& base_kernel);

}  // namespace gedforge
