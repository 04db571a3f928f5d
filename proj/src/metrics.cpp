#include "gedforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "json.hpp"

namespace gedforge {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && v[idx[j]] == v[idx[i]]) ++j;
    double mean_rank = (i + j - 1) / 2.0 + 1.0;  // ranks are 1-based
    for (int k = i; k < j; ++k) ranks[idx[k]] = mean_rank;
    i = j;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DegenerateRankingError("rank correlation undefined for a constant vector");
  return sxy / std::sqrt(sxx * syy);
}

// counts strict inversions while sorting; equal keys contribute nothing
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& tmp, int lo, int hi) {
  if (hi - lo < 2) return 0;
  int mid = (lo + hi) / 2;
  std::int64_t swaps = merge_count(v, tmp, lo, mid) + merge_count(v, tmp, mid, hi);
  int a = lo, b = mid, o = lo;
  while (a < mid && b < hi) {
    if (v[b] < v[a]) {
      swaps += mid - a;
      tmp[o++] = v[b++];
    } else {
      tmp[o++] = v[a++];
    }
  }
  while (a < mid) tmp[o++] = v[a++];
  while (b < hi) tmp[o++] = v[b++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
  return swaps;
}

std::int64_t tie_pairs(const std::vector<double>& sorted_keys) {
  std::int64_t total = 0;
  std::size_t i = 0;
  while (i < sorted_keys.size()) {
    std::size_t j = i;
    while (j < sorted_keys.size() && sorted_keys[j] == sorted_keys[i]) ++j;
    std::int64_t t = static_cast<std::int64_t>(j - i);
    total += t * (t - 1) / 2;
    i = j;
  }
  return total;
}

std::vector<int> top_k_ids(const std::vector<double>& scores, int k) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  idx.resize(k);
  return idx;
}

double checked(double v) {
  require(!std::isnan(v), "missing ground truth or prediction");
  return v;
}

const char* fmt(double v, char* buf) {
  if (std::isnan(v)) return "nan";
  std::snprintf(buf, 32, "%.12g", v);
  return buf;
}

nlohmann::json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

double nged(double ged, int n1, int n2) {
  require(n1 >= 1 && n2 >= 1, "graph sizes must be positive");
  require(ged >= 0.0, "distance must be non-negative");
  return ged / ((n1 + n2) / 2.0);
}

double ged_to_sim(double nged_value) {
  require(nged_value >= 0.0, "normalized distance must be non-negative");
  return std::exp(-nged_value);
}

double spearman_rho(const std::vector<double>& pred, const std::vector<double>& truth) {
  require(pred.size() == truth.size(), "score vectors must have equal length");
  require(pred.size() >= 2, "need at least two scores");
  return pearson(average_ranks(pred), average_ranks(truth));
}

double kendall_tau(const std::vector<double>& pred, const std::vector<double>& truth) {
  require(pred.size() == truth.size(), "score vectors must have equal length");
  require(pred.size() >= 2, "need at least two scores");
  const int n = static_cast<int>(pred.size());

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (pred[a] != pred[b]) return pred[a] < pred[b];
    return truth[a] < truth[b];
  });

  std::vector<double> x_sorted(n), y_in_x_order(n);
  for (int i = 0; i < n; ++i) {
    x_sorted[i] = pred[idx[i]];
    y_in_x_order[i] = truth[idx[i]];
  }

  std::int64_t joint_ties = 0;
  {
    int i = 0;
    while (i < n) {
      int j = i;
      while (j < n && x_sorted[j] == x_sorted[i] && y_in_x_order[j] == y_in_x_order[i]) ++j;
      std::int64_t t = j - i;
      joint_ties += t * (t - 1) / 2;
      i = j;
    }
  }

  std::int64_t x_ties = tie_pairs(x_sorted);
  std::vector<double> y_sorted = y_in_x_order;
  std::sort(y_sorted.begin(), y_sorted.end());
  std::int64_t y_ties = tie_pairs(y_sorted);

  std::vector<double> work = y_in_x_order, tmp(n);
  std::int64_t discordant = merge_count(work, tmp, 0, n);

  std::int64_t total = static_cast<std::int64_t>(n) * (n - 1) / 2;
  if (total == x_ties || total == y_ties)
    throw DegenerateRankingError("rank correlation undefined for a constant vector");
  double con_minus_dis =
      static_cast<double>(total - x_ties - y_ties + joint_ties - 2 * discordant);
  return con_minus_dis /
         std::sqrt(static_cast<double>(total - x_ties) * static_cast<double>(total - y_ties));
}

double precision_at_k(const std::vector<double>& pred, const std::vector<double>& truth, int k) {
  require(pred.size() == truth.size(), "score vectors must have equal length");
  require(k > 0, "k must be positive");
  require(k <= static_cast<int>(pred.size()), "k exceeds the candidate count");
  std::vector<int> p = top_k_ids(pred, k);
  std::vector<int> t = top_k_ids(truth, k);
  std::sort(p.begin(), p.end());
  std::sort(t.begin(), t.end());
  std::vector<int> both;
  std::set_intersection(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(both));
  return static_cast<double>(both.size()) / k;
}

RankingReport evaluate(const std::vector<std::vector<double>>& predicted,
                       const std::vector<std::vector<double>>& truth) {
  require(!predicted.empty(), "need at least one query");
  require(predicted.size() == truth.size(), "prediction and truth query counts differ");
  const int q = static_cast<int>(predicted.size());
  const int m = static_cast<int>(predicted[0].size());
  require(m >= 20, "need at least 20 candidates for p@20");

  RankingReport report;
  report.num_queries = q;
  report.num_candidates = m;

  double pooled_sq = 0.0;
  double sum_rho = 0.0, sum_tau = 0.0, sum_p10 = 0.0, sum_p20 = 0.0;
  int rho_defined = 0, tau_defined = 0;
  std::vector<double> flat_pred, flat_truth;
  flat_pred.reserve(static_cast<std::size_t>(q) * m);
  flat_truth.reserve(static_cast<std::size_t>(q) * m);

  for (int i = 0; i < q; ++i) {
    require(static_cast<int>(predicted[i].size()) == m && static_cast<int>(truth[i].size()) == m,
            "ragged score matrix");
    RankingReport::Query row;
    row.query_id = i;
    row.order = top_k_ids(predicted[i], m);

    double sq = 0.0;
    for (int c = 0; c < m; ++c) {
      double d = checked(predicted[i][c]) - checked(truth[i][c]);
      sq += d * d;
      flat_pred.push_back(predicted[i][c]);
      flat_truth.push_back(truth[i][c]);
    }
    row.metrics.mse = sq / m;
    pooled_sq += sq;

    try {
      row.metrics.rho = spearman_rho(predicted[i], truth[i]);
      row.metrics.rho_defined = true;
      sum_rho += row.metrics.rho;
      ++rho_defined;
    } catch (const DegenerateRankingError&) {
      row.metrics.rho = kNan;
      ++report.rho_excluded;
    }
    try {
      row.metrics.tau = kendall_tau(predicted[i], truth[i]);
      row.metrics.tau_defined = true;
      sum_tau += row.metrics.tau;
      ++tau_defined;
    } catch (const DegenerateRankingError&) {
      row.metrics.tau = kNan;
      ++report.tau_excluded;
    }
    row.metrics.p_at_10 = precision_at_k(predicted[i], truth[i], 10);
    row.metrics.p_at_20 = precision_at_k(predicted[i], truth[i], 20);
    sum_p10 += row.metrics.p_at_10;
    sum_p20 += row.metrics.p_at_20;
    report.queries.push_back(std::move(row));
  }

  report.mse = pooled_sq / (static_cast<double>(q) * m);
  report.mean_rho = rho_defined > 0 ? sum_rho / rho_defined : kNan;
  report.mean_tau = tau_defined > 0 ? sum_tau / tau_defined : kNan;
  report.p_at_10 = sum_p10 / q;
  report.p_at_20 = sum_p20 / q;
  try {
    report.pooled_rho = spearman_rho(flat_pred, flat_truth);
  } catch (const DegenerateRankingError&) {
    report.pooled_rho = kNan;
  }
  try {
    report.pooled_tau = kendall_tau(flat_pred, flat_truth);
  } catch (const DegenerateRankingError&) {
    report.pooled_tau = kNan;
  }
  return report;
}

std::string report_to_json(const RankingReport& report) {
  nlohmann::json j;
  j["num_queries"] = report.num_queries;
  j["num_candidates"] = report.num_candidates;
  j["aggregate"] = {
      {"mse", number_or_null(report.mse)},
      {"rho", number_or_null(report.mean_rho)},
      {"tau", number_or_null(report.mean_tau)},
      {"p_at_10", number_or_null(report.p_at_10)},
      {"p_at_20", number_or_null(report.p_at_20)},
      {"pooled_rho", number_or_null(report.pooled_rho)},
      {"pooled_tau", number_or_null(report.pooled_tau)},
      {"rho_excluded", report.rho_excluded},
      {"tau_excluded", report.tau_excluded},
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.queries) {
    nlohmann::json r;
    r["query"] = row.query_id;
    r["order"] = row.order;
    r["mse"] = number_or_null(row.metrics.mse);
    r["rho"] = row.metrics.rho_defined ? nlohmann::json(row.metrics.rho) : nlohmann::json(nullptr);
    r["tau"] = row.metrics.tau_defined ? nlohmann::json(row.metrics.tau) : nlohmann::json(nullptr);
    r["p_at_10"] = row.metrics.p_at_10;
    r["p_at_20"] = row.metrics.p_at_20;
    rows.push_back(std::move(r));
  }
  j["queries"] = std::move(rows);
  return j.dump(2);
}

std::string report_to_csv(const RankingReport& report) {
  std::string out = "mse,rho,tau,p_at_10,p_at_20,pooled_rho,pooled_tau,rho_excluded,tau_excluded\n";
  char buf[32];
  out += fmt(report.mse, buf);
  out += ',';
  out += fmt(report.mean_rho, buf);
  out += ',';
  out += fmt(report.mean_tau, buf);
  out += ',';
  out += fmt(report.p_at_10, buf);
  out += ',';
  out += fmt(report.p_at_20, buf);
  out += ',';
  out += fmt(report.pooled_rho, buf);
  out += ',';
  out += fmt(report.pooled_tau, buf);
  out += ',';
  out += std::to_string(report.rho_excluded);
  out += ',';
  out += std::to_string(report.tau_excluded);
  out += '\n';
  return out;
}

}  // namespace gedforge
