#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gedforge/graph.hpp"

namespace gedforge {

enum class EditOpKind { kRelabelNode, kDeleteNode, kInsertNode, kDeleteEdge, kInsertEdge };

struct EditOp {
  EditOpKind kind;
  int u = -1;      // node / first endpoint (g1 ids for deletions, g2 ids for insertions)
  int v = -1;      // second endpoint for edge ops
  int label = -1;  // target label for relabel / insert-node
};

enum class GedBound { kExact, kUpper, kLower };

struct GedResult {
  double distance = 0.0;  // integral for exact/upper methods; HED may be fractional
  GedBound bound = GedBound::kExact;
  std::optional<std::vector<EditOp>> edit_path;
  std::int64_t expanded = 0;  // search states expanded / mappings enumerated
};

// A complete node alignment: mapping[u] = image of g1 node u in g2, or -1 for
// deletion. Unused g2 nodes are insertions. Every alignment induces a full
// edit path, whose cost is an upper bound on the true GED; the exact GED is
// the minimum over all alignments.
using NodeAlignment = std::vector<int>;

int alignment_cost(const LabeledGraph& g1, const LabeledGraph& g2, const NodeAlignment& m);
std::vector<EditOp> alignment_to_path(const LabeledGraph& g1, const LabeledGraph& g2,
                                      const NodeAlignment& m);

class SizeGuardError : public std::invalid_argument {
 public:
  explicit SizeGuardError(const std::string& what) : std::invalid_argument(what) {}
};

class SearchBudgetError : public std::runtime_error {
 public:
  explicit SearchBudgetError(const std::string& what) : std::runtime_error(what) {}
};

// Exhaustive oracle: enumerates every injective partial map V1 -> V2 + {eps}.
// Guarded to |G1| + |G2| <= 12.
GedResult ged_bruteforce(const LabeledGraph& g1, const LabeledGraph& g2);

struct AstarOptions {
  int max_nodes = 10;                    // reject larger graphs up front
  std::int64_t expansion_budget = 4'000'000;  // throws SearchBudgetError beyond this
  bool prune_with_beam_bound = true;     // seed an upper bound from a narrow beam
  bool record_admissibility = false;     // track max popped f for debug assertions
};

struct AstarStats {
  double max_popped_f = 0.0;  // meaningful when record_admissibility is set
};

GedResult ged_astar(const LabeledGraph& g1, const LabeledGraph& g2,
                    const AstarOptions& opts = {}, AstarStats* stats = nullptr);

inline constexpr int kUnboundedWidth = std::numeric_limits<int>::max();

// Level-synchronous beam search over the same state space as ged_astar: keeps
// the `width` best partial alignments per depth. Returns an upper bound;
// unbounded width degenerates to an exhaustive sweep and is exact.
GedResult ged_beam(const LabeledGraph& g1, const LabeledGraph& g2, int width);

}  // namespace gedforge
