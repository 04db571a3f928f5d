#include "gedforge/exact.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <queue>

namespace gedforge {

namespace {

void validate_alignment(const LabeledGraph& g1, const LabeledGraph& g2, const NodeAlignment& m) {
  if (static_cast<int>(m.size()) != g1.node_count())
    throw std::invalid_argument("alignment size mismatch");
  std::vector<bool> used(g2.node_count(), false);
  for (int v : m) {
    if (v < -1 || v >= g2.node_count()) throw std::invalid_argument("alignment target out of range");
    if (v >= 0) {
      if (used[v]) throw std::invalid_argument("alignment not injective");
      used[v] = true;
    }
  }
}

}  // namespace

int alignment_cost(const LabeledGraph& g1, const LabeledGraph& g2, const NodeAlignment& m) {
  validate_alignment(g1, g2, m);
  int cost = 0;
  std::vector<int> inv(g2.node_count(), -1);
  for (int u = 0; u < g1.node_count(); ++u) {
    if (m[u] < 0) {
      ++cost;  // delete node
    } else {
      inv[m[u]] = u;
      if (g1.label(u) != g2.label(m[u])) ++cost;  // relabel
    }
  }
  for (int v = 0; v < g2.node_count(); ++v)
    if (inv[v] < 0) ++cost;  // insert node
  for (auto [a, b] : g1.edges())
    if (m[a] < 0 || m[b] < 0 || !g2.has_edge(m[a], m[b])) ++cost;  // delete edge
  for (auto [x, y] : g2.edges())
    if (inv[x] < 0 || inv[y] < 0 || !g1.has_edge(inv[x], inv[y])) ++cost;  // insert edge
  return cost;
}

std::vector<EditOp> alignment_to_path(const LabeledGraph& g1, const LabeledGraph& g2,
                                      const NodeAlignment& m) {
  validate_alignment(g1, g2, m);
  std::vector<EditOp> path;
  std::vector<int> inv(g2.node_count(), -1);
  for (int u = 0; u < g1.node_count(); ++u)
    if (m[u] >= 0) inv[m[u]] = u;
  // Edge deletions first so node deletions never strand an incident edge.
  for (auto [a, b] : g1.edges())
    if (m[a] < 0 || m[b] < 0 || !g2.has_edge(m[a], m[b]))
      path.push_back({EditOpKind::kDeleteEdge, a, b, -1});
  for (int u = 0; u < g1.node_count(); ++u) {
    if (m[u] < 0)
      path.push_back({EditOpKind::kDeleteNode, u, -1, -1});
    else if (g1.label(u) != g2.label(m[u]))
      path.push_back({EditOpKind::kRelabelNode, u, -1, g2.label(m[u])});
  }
  for (int v = 0; v < g2.node_count(); ++v)
    if (inv[v] < 0) path.push_back({EditOpKind::kInsertNode, v, -1, g2.label(v)});
  for (auto [x, y] : g2.edges())
    if (inv[x] < 0 || inv[y] < 0 || !g1.has_edge(inv[x], inv[y]))
      path.push_back({EditOpKind::kInsertEdge, x, y, -1});
  return path;
}

GedResult ged_bruteforce(const LabeledGraph& g1, const LabeledGraph& g2) {
  const int n1 = g1.node_count(), n2 = g2.node_count();
  if (n1 + n2 > 12)
    throw SizeGuardError("ged_bruteforce guard: |G1| + |G2| = " + std::to_string(n1 + n2) +
                         " exceeds 12");
  NodeAlignment m(n1, -1), best;
  int best_cost = std::numeric_limits<int>::max();
  std::int64_t enumerated = 0;
  std::vector<bool> used(n2, false);

  auto rec = [&](auto&& self, int u) -> void {
    if (u == n1) {
      ++enumerated;
      int c = alignment_cost(g1, g2, m);
      if (c < best_cost) {
        best_cost = c;
        best = m;
      }
      return;
    }
    for (int v = 0; v < n2; ++v) {
      if (used[v]) continue;
      used[v] = true;
      m[u] = v;
      self(self, u + 1);
      used[v] = false;
    }
    m[u] = -1;
    self(self, u + 1);
  };
  rec(rec, 0);

  GedResult r;
  r.distance = best_cost;
  r.bound = GedBound::kExact;
  r.edit_path = alignment_to_path(g1, g2, best);
  r.expanded = enumerated;
  return r;
}

namespace {

constexpr int kMaxSearchNodes = 32;

// Both graphs relabeled into BFS-rank space: node k of `c1` is the k-th node
// assigned by the search, candidate targets are tried in c2's rank order.
// Labels are remapped onto a joint dense alphabet.
struct SearchContext {
  const LabeledGraph* g1 = nullptr;  // originals, for path reconstruction
  const LabeledGraph* g2 = nullptr;
  NodeOrdering order1, order2;
  int n1 = 0, n2 = 0, n_labels = 0;
  std::vector<int> label1, label2;               // canonical space
  std::vector<std::uint32_t> adj1, adj2;         // adjacency bitmasks, canonical space
  std::vector<int> total2_labels;                // label histogram of g2
  std::vector<std::vector<int>> suffix1_labels;  // [k][l]: labels of g1 ranks >= k
  std::vector<int> suffix1_edges;                // [k]: g1 edges with an endpoint at rank >= k
  int e2_total = 0;

  SearchContext(const LabeledGraph& a, const LabeledGraph& b) : g1(&a), g2(&b) {
    n1 = a.node_count();
    n2 = b.node_count();
    if (n1 > kMaxSearchNodes || n2 > kMaxSearchNodes)
      throw SizeGuardError("search supports at most " + std::to_string(kMaxSearchNodes) +
                           " nodes per graph");
    order1 = bfs_order(a);
    order2 = bfs_order(b);

    std::vector<int> alphabet;
    for (int v = 0; v < n1; ++v) alphabet.push_back(a.label(v));
    for (int v = 0; v < n2; ++v) alphabet.push_back(b.label(v));
    std::sort(alphabet.begin(), alphabet.end());
    alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
    n_labels = static_cast<int>(alphabet.size());
    auto dense = [&](int l) {
      return static_cast<int>(std::lower_bound(alphabet.begin(), alphabet.end(), l) -
                              alphabet.begin());
    };

    label1.resize(n1);
    adj1.assign(n1, 0);
    std::vector<int> rank1(n1);
    for (int r = 0; r < n1; ++r) rank1[order1[r]] = r;
    for (int r = 0; r < n1; ++r) label1[r] = dense(a.label(order1[r]));
    for (auto [u, v] : a.edges()) {
      adj1[rank1[u]] |= 1u << rank1[v];
      adj1[rank1[v]] |= 1u << rank1[u];
    }

    label2.resize(n2);
    adj2.assign(n2, 0);
    std::vector<int> rank2(n2);
    for (int r = 0; r < n2; ++r) rank2[order2[r]] = r;
    for (int r = 0; r < n2; ++r) label2[r] = dense(b.label(order2[r]));
    for (auto [u, v] : b.edges()) {
      adj2[rank2[u]] |= 1u << rank2[v];
      adj2[rank2[v]] |= 1u << rank2[u];
    }

    total2_labels.assign(n_labels, 0);
    for (int l : label2) ++total2_labels[l];

    suffix1_labels.assign(n1 + 1, std::vector<int>(n_labels, 0));
    for (int k = n1 - 1; k >= 0; --k) {
      suffix1_labels[k] = suffix1_labels[k + 1];
      ++suffix1_labels[k][label1[k]];
    }
    // Counting each edge at its larger rank endpoint gives, at k, the number
    // of edges with at least one endpoint of rank >= k.
    suffix1_edges.assign(n1 + 1, 0);
    for (int k = n1 - 1; k >= 0; --k)
      suffix1_edges[k] =
          suffix1_edges[k + 1] + std::popcount(adj1[k] & ((k == 0) ? 0u : ((1u << k) - 1u)));
    e2_total = b.edge_count();
  }

  // Admissible remaining-cost bound: node ops bounded by the one-sided label
  // deficit (relabels, deletions and insertions all cost 1 and disjointly
  // cover the deficit), edge ops bounded by the remaining edge-count gap.
  int heuristic(int depth, std::uint32_t used, int e2_remaining) const {
    std::array<int, 2 * kMaxSearchNodes> used_hist{};
    std::uint32_t u = used;
    while (u) {
      ++used_hist[label2[std::countr_zero(u)]];
      u &= u - 1;
    }
    int d1 = 0, d2 = 0;
    for (int l = 0; l < n_labels; ++l) {
      int c1 = suffix1_labels[depth][l];
      int c2 = total2_labels[l] - used_hist[l];
      d1 += std::max(0, c1 - c2);
      d2 += std::max(0, c2 - c1);
    }
    return std::max(d1, d2) + std::abs(suffix1_edges[depth] - e2_remaining);
  }

  // Incremental edit cost of assigning rank-`depth` node of c1 to `v`
  // (canonical g2 rank, or -1 for deletion), given the prefix map.
  int step_cost(int depth, const std::array<std::int8_t, kMaxSearchNodes>& map, int v) const {
    int cost = (v < 0) ? 1 : (label1[depth] != label2[v] ? 1 : 0);
    const std::uint32_t nbr1 = adj1[depth];
    for (int i = 0; i < depth; ++i) {
      const bool e1 = (nbr1 >> i) & 1u;
      const bool e2 = v >= 0 && map[i] >= 0 && ((adj2[v] >> map[i]) & 1u);
      cost += (e1 != e2) ? 1 : 0;
    }
    return cost;
  }

  NodeAlignment to_original(const std::array<std::int8_t, kMaxSearchNodes>& map) const {
    NodeAlignment m(n1, -1);
    for (int k = 0; k < n1; ++k)
      if (map[k] >= 0) m[order1[k]] = order2[map[k]];
    return m;
  }
};

struct ArenaState {
  std::int32_t parent;
  std::uint32_t used;
  std::uint16_t g;
  std::uint16_t h;
  std::uint16_t e2_remaining;
  std::int8_t depth;
  std::int8_t target;
};

struct PqEntry {
  std::int32_t f;
  std::int32_t g;
  std::int32_t idx;
};

// Min-f; ties prefer deeper (larger g), then FIFO.
struct PqWorse {
  bool operator()(const PqEntry& a, const PqEntry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g < b.g;
    return a.idx > b.idx;
  }
};

std::array<std::int8_t, kMaxSearchNodes> reconstruct_map(const std::vector<ArenaState>& arena,
                                                         std::int32_t idx) {
  std::array<std::int8_t, kMaxSearchNodes> map;
  map.fill(-1);
  while (idx >= 0) {
    const ArenaState& s = arena[idx];
    if (s.depth > 0) map[s.depth - 1] = s.target;
    idx = s.parent;
  }
  return map;
}

}  // namespace

GedResult ged_astar(const LabeledGraph& g1, const LabeledGraph& g2, const AstarOptions& opts,
                    AstarStats* stats) {
  if (g1.node_count() > opts.max_nodes || g2.node_count() > opts.max_nodes)
    throw SizeGuardError("ged_astar guard: max(|G1|,|G2|) exceeds " +
                         std::to_string(opts.max_nodes));
  SearchContext ctx(g1, g2);
  const int n1 = ctx.n1, n2 = ctx.n2;

  int upper_bound = std::numeric_limits<int>::max();
  if (opts.prune_with_beam_bound) upper_bound = static_cast<int>(ged_beam(g1, g2, 8).distance);

  std::vector<ArenaState> arena;
  arena.reserve(1024);
  std::priority_queue<PqEntry, std::vector<PqEntry>, PqWorse> open;

  arena.push_back({-1, 0u, 0, static_cast<std::uint16_t>(ctx.heuristic(0, 0u, ctx.e2_total)),
                   static_cast<std::uint16_t>(ctx.e2_total), 0, -1});
  open.push({arena[0].h, 0, 0});

  std::int64_t expanded = 0;
  double max_popped_f = 0.0;

  while (!open.empty()) {
    const PqEntry top = open.top();
    open.pop();
    const ArenaState s = arena[top.idx];
    if (opts.record_admissibility) max_popped_f = std::max(max_popped_f, double(top.f));

    if (s.depth == n1) {
      auto map = reconstruct_map(arena, top.idx);
      NodeAlignment m = ctx.to_original(map);
      GedResult r;
      r.distance = s.g;
      r.bound = GedBound::kExact;
      r.edit_path = alignment_to_path(g1, g2, m);
      r.expanded = expanded;
      if (stats) stats->max_popped_f = max_popped_f;
      return r;
    }

    if (++expanded > opts.expansion_budget)
      throw SearchBudgetError("ged_astar expansion budget exhausted (" +
                              std::to_string(opts.expansion_budget) + " states)");

    const auto map = reconstruct_map(arena, top.idx);
    const int depth = s.depth;
    for (int v = 0; v <= n2; ++v) {  // real targets in rank order, then deletion
      const int cand = (v == n2) ? -1 : v;
      if (cand >= 0 && ((s.used >> cand) & 1u)) continue;
      const int step = ctx.step_cost(depth, map, cand);
      std::uint32_t used = cand >= 0 ? (s.used | (1u << cand)) : s.used;
      int e2r = s.e2_remaining;
      if (cand >= 0) e2r -= std::popcount(ctx.adj2[cand] & s.used);
      int g = s.g + step;
      int h;
      if (depth + 1 == n1) {
        g += (n2 - std::popcount(used)) + e2r;  // node + edge insertions to finish
        h = 0;
      } else {
        h = ctx.heuristic(depth + 1, used, e2r);
      }
      if (g + h > upper_bound) continue;
      arena.push_back({top.idx, used, static_cast<std::uint16_t>(g),
                       static_cast<std::uint16_t>(h), static_cast<std::uint16_t>(e2r),
                       static_cast<std::int8_t>(depth + 1), static_cast<std::int8_t>(cand)});
      open.push({g + h, g, static_cast<std::int32_t>(arena.size() - 1)});
    }
  }
  // Unreachable: the bound comes from a genuine alignment whose search path
  // is never pruned (strict > test), so a goal is always popped. Safety net.
  AstarOptions retry = opts;
  retry.prune_with_beam_bound = false;
  return ged_astar(g1, g2, retry, stats);
}

GedResult ged_beam(const LabeledGraph& g1, const LabeledGraph& g2, int width) {
  if (width < 1) throw std::invalid_argument("beam width must be >= 1");
  SearchContext ctx(g1, g2);
  const int n1 = ctx.n1, n2 = ctx.n2;

  struct BeamState {
    std::array<std::int8_t, kMaxSearchNodes> map;
    std::uint32_t used;
    std::int32_t g;
    std::int32_t f;
    std::uint16_t e2_remaining;
  };

  BeamState root;
  root.map.fill(-1);
  root.used = 0;
  root.g = 0;
  root.f = ctx.heuristic(0, 0u, ctx.e2_total);
  root.e2_remaining = static_cast<std::uint16_t>(ctx.e2_total);

  std::vector<BeamState> level{root};
  std::int64_t expanded = 0;

  for (int depth = 0; depth < n1; ++depth) {
    std::vector<BeamState> next;
    next.reserve(level.size() * (n2 + 1));
    for (const BeamState& s : level) {
      ++expanded;
      // Real targets in c2 rank order, then deletion: on identical graphs the
      // diagonal extension is generated first and survives any truncation.
      for (int v = 0; v <= n2; ++v) {
        const int cand = (v == n2) ? -1 : v;
        if (cand >= 0 && ((s.used >> cand) & 1u)) continue;
        BeamState c = s;
        c.g += ctx.step_cost(depth, s.map, cand);
        if (cand >= 0) {
          c.used |= 1u << cand;
          c.e2_remaining = static_cast<std::uint16_t>(c.e2_remaining -
                                                      std::popcount(ctx.adj2[cand] & s.used));
          c.map[depth] = static_cast<std::int8_t>(cand);
        }
        if (depth + 1 == n1) {
          c.g += (n2 - std::popcount(c.used)) + c.e2_remaining;
          c.f = c.g;
        } else {
          c.f = c.g + ctx.heuristic(depth + 1, c.used, c.e2_remaining);
        }
        next.push_back(c);
      }
    }
    std::stable_sort(next.begin(), next.end(), [](const BeamState& a, const BeamState& b) {
      if (a.f != b.f) return a.f < b.f;
      return a.g > b.g;
    });
    if (width != kUnboundedWidth && static_cast<int>(next.size()) > width) next.resize(width);
    level.swap(next);
  }

  const BeamState& best = level.front();  // sorted by f = g at the final depth
  NodeAlignment m = ctx.to_original(best.map);
  GedResult r;
  r.distance = best.g;
  r.bound = GedBound::kUpper;
  r.edit_path = alignment_to_path(g1, g2, m);
  r.expanded = expanded;
  return r;
}

}  // namespace gedforge
