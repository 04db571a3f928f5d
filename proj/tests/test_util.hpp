#pragma once

#include "gedforge/graph.hpp"
#include "gedforge/rng.hpp"

namespace gedforge::testutil {

inline LabeledGraph random_graph(Rng& rng, int max_nodes, int labels, double edge_prob = 0.4,
                                 bool connected = false) {
  int n = rng.range(1, max_nodes);
  return generate_graph(n, edge_prob, labels, rng.next_u64(), connected);
}

inline NodeOrdering random_permutation(Rng& rng, int n) {
  NodeOrdering p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  rng.shuffle(p);
  return p;
}

}  // namespace gedforge::testutil
