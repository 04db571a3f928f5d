#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gedforge {

// Normalized distance: ged / mean(n1, n2).
double nged(double ged, int n1, int n2);

// Similarity transform exp(-x), mapping [0, inf) onto (0, 1].
double ged_to_sim(double nged_value);

// Thrown when a rank correlation is undefined because one side has no
// rank variance (a constant vector).
struct DegenerateRankingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pearson correlation of average ranks. Ties share the mean of the rank
// positions they span.
double spearman_rho(const std::vector<double>& pred, const std::vector<double>& truth);

// Tie-corrected tau (the "b" form). Runs in O(n log n) via merge counting.
double kendall_tau(const std::vector<double>& pred, const std::vector<double>& truth);

// Fraction of the true top-k candidate ids recovered in the predicted
// top-k. Scores are indexed by candidate id; ties in the cutoff are broken
// by candidate id ascending on both sides.
double precision_at_k(const std::vector<double>& pred, const std::vector<double>& truth, int k);

struct QueryMetrics {
  double mse = 0.0;
  double rho = 0.0;
  double tau = 0.0;
  bool rho_defined = false;
  bool tau_defined = false;
  double p_at_10 = 0.0;
  double p_at_20 = 0.0;
};

struct RankingReport {
  struct Query {
    int query_id = 0;
    std::vector<int> order;  // candidate ids sorted by predicted similarity, best first
    QueryMetrics metrics;
  };

  int num_queries = 0;
  int num_candidates = 0;
  double mse = 0.0;       // pooled over every query x candidate pair
  double mean_rho = 0.0;  // per-query averages, degenerate queries excluded
  double mean_tau = 0.0;
  double pooled_rho = 0.0;  // single correlation over all pairs flattened
  double pooled_tau = 0.0;
  double p_at_10 = 0.0;
  double p_at_20 = 0.0;
  int rho_excluded = 0;
  int tau_excluded = 0;
  std::vector<Query> queries;
};

// predicted[q][c] and truth[q][c] are similarity scores for query q against
// candidate c. Every row must have the same width; widths below 20 are
// rejected because p@10 and p@20 would be ill-posed.
RankingReport evaluate(const std::vector<std::vector<double>>& predicted,
                       const std::vector<std::vector<double>>& truth);

std::string report_to_json(const RankingReport& report);
// Aggregate row: mse, rho, tau, p@10, p@20, then the pooled and exclusion
// extras.
std::string report_to_csv(const RankingReport& report);

}  // namespace gedforge
