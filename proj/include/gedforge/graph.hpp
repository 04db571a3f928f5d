#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace gedforge {

// Undirected node-labeled graph. Node ids are dense 0..N-1, labels are dense
// integers. Edges are stored once with u < v and queried symmetrically.
// Immutable after construction; safe to share across threads.
class LabeledGraph {
 public:
  LabeledGraph(std::vector<int> labels, std::vector<std::pair<int, int>> edges);

  int node_count() const { return static_cast<int>(labels_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int label(int v) const { return labels_[v]; }
  const std::vector<int>& labels() const { return labels_; }
  // Canonical edge list: u < v, sorted lexicographically.
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int v) const { return adj_[v]; }
  int degree(int v) const { return static_cast<int>(adj_[v].size()); }
  bool has_edge(int u, int v) const;

  bool operator==(const LabeledGraph& other) const {
    return labels_ == other.labels_ && edges_ == other.edges_;
  }

 private:
  std::vector<int> labels_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adj_;
};

// Bijection on 0..N-1; position = rank in the ordering.
using NodeOrdering = std::vector<int>;

enum class GroundTruthKind { kExact, kUpperBoundMin };

struct GraphPair {
  int i = -1;
  int j = -1;
  int ground_truth_ged = -1;  // -1 when absent
  GroundTruthKind kind = GroundTruthKind::kExact;
};

// Raised on any structural violation while reading graph JSON. The message
// starts with one of: "malformed graph json", "duplicate node id",
// "non-dense node ids", "dangling edge endpoint", "self-loop",
// "duplicate edge", "negative label".
class GraphParseError : public std::runtime_error {
 public:
  explicit GraphParseError(const std::string& what) : std::runtime_error(what) {}
};

// JSON format: {"nodes":[{"id":int,"label":int}],"edges":[[int,int]]}
LabeledGraph parse_graph(const std::string& text);
LabeledGraph parse_graph_json(const nlohmann::json& j);
std::string serialize_graph(const LabeledGraph& g);
nlohmann::json graph_to_json(const LabeledGraph& g);

// Smallest alphabet covering the graph's labels (max label + 1).
int label_alphabet_size(const LabeledGraph& g);

// Deterministic, id-independent BFS ordering. The root of each component is
// the node maximizing (degree, label, 2-round neighborhood hash); frontiers
// are expanded level by level with the next level sorted by the same key
// descending. Components are visited in decreasing order of their root key.
// Node ids break any remaining key collisions.
NodeOrdering bfs_order(const LabeledGraph& g);

// Tie-break keys used by bfs_order, indexed by node id.
struct BfsKey {
  int degree;
  int label;
  std::uint64_t neighborhood_hash;
  auto operator<=>(const BfsKey&) const = default;
};
std::vector<BfsKey> bfs_keys(const LabeledGraph& g);

// True when no two nodes share a tie-break key; the ordering (and everything
// built on it) is then invariant under node permutation.
bool has_unique_bfs_keys(const LabeledGraph& g);

// Relabels node ids: old node p[r] receives new id r. In particular
// permute_graph(g, bfs_order(g)) places the BFS-first node at id 0.
LabeledGraph permute_graph(const LabeledGraph& g, const NodeOrdering& p);

// G(n, p) with labels uniform over [0, labels). `connected` first wires a
// random spanning tree. Deterministic in all arguments.
LabeledGraph generate_graph(int n, double edge_prob, int labels, std::uint64_t seed,
                            bool connected = false);

}  // namespace gedforge
