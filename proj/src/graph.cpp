#include "gedforge/graph.hpp"

#include <algorithm>
#include <json.hpp>

#include "gedforge/rng.hpp"

namespace gedforge {

namespace {

std::pair<int, int> canonical_edge(int u, int v) {
  return u < v ? std::make_pair(u, v) : std::make_pair(v, u);
}

}  // namespace

LabeledGraph::LabeledGraph(std::vector<int> labels, std::vector<std::pair<int, int>> edges)
    : labels_(std::move(labels)) {
  if (labels_.empty()) throw std::invalid_argument("graph needs at least one node");
  const int n = node_count();
  edges_.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw std::invalid_argument("edge endpoint out of range");
    if (u == v) throw std::invalid_argument("self-loop");
    edges_.push_back(canonical_edge(u, v));
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
    throw std::invalid_argument("duplicate edge");
  adj_.resize(n);
  for (auto [u, v] : edges_) {
    adj_[u].push_back(v);
    adj_[v].push_back(u);
  }
  for (auto& nbrs : adj_) std::sort(nbrs.begin(), nbrs.end());
}

bool LabeledGraph::has_edge(int u, int v) const {
  const auto& nbrs = adj_[u];
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

LabeledGraph parse_graph(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw GraphParseError(std::string("malformed graph json: ") + e.what());
  }
  return parse_graph_json(j);
}

LabeledGraph parse_graph_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j.contains("edges") ||
      !j["nodes"].is_array() || !j["edges"].is_array())
    throw GraphParseError("malformed graph json: expected {nodes:[...], edges:[...]}");

  const auto& nodes = j["nodes"];
  if (nodes.empty()) throw GraphParseError("malformed graph json: empty node list");

  std::vector<int> labels(nodes.size(), -1);
  std::vector<bool> seen(nodes.size(), false);
  for (const auto& rec : nodes) {
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("label") ||
        !rec["id"].is_number_integer() || !rec["label"].is_number_integer())
      throw GraphParseError("malformed graph json: node record needs integer id and label");
    const int id = rec["id"].get<int>();
    const int label = rec["label"].get<int>();
    if (id < 0 || id >= static_cast<int>(nodes.size()))
      throw GraphParseError("non-dense node ids: id " + std::to_string(id) + " outside 0.." +
                            std::to_string(nodes.size() - 1));
    if (seen[id]) throw GraphParseError("duplicate node id: " + std::to_string(id));
    if (label < 0) throw GraphParseError("negative label on node " + std::to_string(id));
    seen[id] = true;
    labels[id] = label;
  }

  std::vector<std::pair<int, int>> edges;
  std::vector<std::pair<int, int>> sorted_edges;
  for (const auto& e : j["edges"]) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
      throw GraphParseError("malformed graph json: edge must be [int,int]");
    const int u = e[0].get<int>();
    const int v = e[1].get<int>();
    if (u < 0 || u >= static_cast<int>(nodes.size()) || v < 0 ||
        v >= static_cast<int>(nodes.size()))
      throw GraphParseError("dangling edge endpoint: [" + std::to_string(u) + "," +
                            std::to_string(v) + "]");
    if (u == v) throw GraphParseError("self-loop at node " + std::to_string(u));
    edges.push_back(canonical_edge(u, v));
  }
  sorted_edges = edges;
  std::sort(sorted_edges.begin(), sorted_edges.end());
  if (std::adjacent_find(sorted_edges.begin(), sorted_edges.end()) != sorted_edges.end())
    throw GraphParseError("duplicate edge");

  return LabeledGraph(std::move(labels), std::move(edges));
}

nlohmann::json graph_to_json(const LabeledGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (int v = 0; v < g.node_count(); ++v)
    nodes.push_back({{"id", v}, {"label", g.label(v)}});
  nlohmann::json edges = nlohmann::json::array();
  for (auto [u, v] : g.edges()) edges.push_back({u, v});
  return {{"nodes", nodes}, {"edges", edges}};
}

std::string serialize_graph(const LabeledGraph& g) { return graph_to_json(g).dump(); }

int label_alphabet_size(const LabeledGraph& g) {
  return *std::max_element(g.labels().begin(), g.labels().end()) + 1;
}

std::vector<BfsKey> bfs_keys(const LabeledGraph& g) {
  const int n = g.node_count();
  auto mix = [](std::uint64_t h, std::uint64_t x) {
    h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  };
  // Two rounds of neighborhood aggregation (Weisfeiler-Lehman style): the
  // hash of a node depends on its 2-hop label structure, not on node ids.
  std::vector<std::uint64_t> h(n), next(n);
  for (int v = 0; v < n; ++v)
    h[v] = mix(static_cast<std::uint64_t>(g.label(v)) + 1,
               static_cast<std::uint64_t>(g.degree(v)) * 0x7fffffffULL);
  for (int round = 0; round < 2; ++round) {
    for (int v = 0; v < n; ++v) {
      std::vector<std::uint64_t> nb;
      nb.reserve(g.neighbors(v).size());
      for (int w : g.neighbors(v)) nb.push_back(h[w]);
      std::sort(nb.begin(), nb.end());
      std::uint64_t acc = mix(h[v], 0x1000003ULL);
      for (std::uint64_t x : nb) acc = mix(acc, x);
      next[v] = acc;
    }
    h.swap(next);
  }
  std::vector<BfsKey> keys(n);
  for (int v = 0; v < n; ++v) keys[v] = BfsKey{g.degree(v), g.label(v), h[v]};
  return keys;
}

bool has_unique_bfs_keys(const LabeledGraph& g) {
  auto keys = bfs_keys(g);
  std::sort(keys.begin(), keys.end());
  return std::adjacent_find(keys.begin(), keys.end()) == keys.end();
}

NodeOrdering bfs_order(const LabeledGraph& g) {
  const int n = g.node_count();
  const auto keys = bfs_keys(g);
  // Descending key, node id as the final deterministic fallback.
  auto before = [&](int a, int b) {
    if (keys[a] != keys[b]) return keys[b] < keys[a];
    return a < b;
  };

  std::vector<bool> visited(n, false);
  NodeOrdering order;
  order.reserve(n);

  std::vector<int> roots(n);
  for (int v = 0; v < n; ++v) roots[v] = v;
  std::sort(roots.begin(), roots.end(), before);

  for (int root : roots) {
    if (visited[root]) continue;
    std::vector<int> level{root};
    visited[root] = true;
    while (!level.empty()) {
      std::vector<int> next_level;
      for (int v : level) {
        order.push_back(v);
        for (int w : g.neighbors(v)) {
          if (!visited[w]) {
            visited[w] = true;
            next_level.push_back(w);
          }
        }
      }
      std::sort(next_level.begin(), next_level.end(), before);
      level.swap(next_level);
    }
  }
  return order;
}

LabeledGraph permute_graph(const LabeledGraph& g, const NodeOrdering& p) {
  const int n = g.node_count();
  if (static_cast<int>(p.size()) != n) throw std::invalid_argument("permutation size mismatch");
  std::vector<int> rank(n, -1);  // rank[old id] = new id
  for (int r = 0; r < n; ++r) {
    if (p[r] < 0 || p[r] >= n || rank[p[r]] != -1)
      throw std::invalid_argument("permutation is not a bijection");
    rank[p[r]] = r;
  }
  std::vector<int> labels(n);
  for (int v = 0; v < n; ++v) labels[rank[v]] = g.label(v);
  std::vector<std::pair<int, int>> edges;
  edges.reserve(g.edge_count());
  for (auto [u, v] : g.edges()) edges.push_back(canonical_edge(rank[u], rank[v]));
  return LabeledGraph(std::move(labels), std::move(edges));
}

LabeledGraph generate_graph(int n, double edge_prob, int labels, std::uint64_t seed,
                            bool connected) {
  if (n < 1) throw std::invalid_argument("node count must be >= 1");
  if (labels < 1) throw std::invalid_argument("alphabet size must be >= 1");
  if (edge_prob < 0.0 || edge_prob > 1.0) throw std::invalid_argument("edge_prob outside [0,1]");

  Rng rng = Rng::substream(seed, "generate_graph");
  std::vector<int> node_labels(n);
  for (int v = 0; v < n; ++v) node_labels[v] = static_cast<int>(rng.below(labels));

  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<char>> present(n, std::vector<char>(n, 0));
  if (connected && n > 1) {
    // Random recursive tree: node v attaches to a uniform earlier node.
    for (int v = 1; v < n; ++v) {
      int u = static_cast<int>(rng.below(v));
      edges.push_back(canonical_edge(u, v));
      present[u][v] = present[v][u] = 1;
    }
  }
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      const bool draw = rng.bernoulli(edge_prob);  // consumed for every pair
      if (!present[u][v] && draw) {
        edges.push_back({u, v});
        present[u][v] = present[v][u] = 1;
      }
    }
  return LabeledGraph(std::move(node_labels), std::move(edges));
}

}  // namespace gedforge
