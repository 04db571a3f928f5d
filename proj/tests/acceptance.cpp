// Acceptance gate. Each numbered criterion prints exactly one PASS/FAIL
// line on stdout; progress for the long-running ones goes to stderr. The
// exit code is the number of failed criteria.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "gedforge/harness.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace gedforge;
namespace ad = gedforge::ad;
using testutil::lap_bruteforce;
using testutil::random_graph;
using testutil::random_permutation;
using testutil::transport_bruteforce;

namespace {

// pinned tolerances
constexpr double kLapTol = 1e-9;
constexpr double kTransportTol = 1e-9;
constexpr double kGradTol = 1e-4;        // per-primitive finite differences
constexpr double kEndToEndGradTol = 1e-3;
constexpr double kMetricTol = 1e-12;     // hand-computed metric examples
constexpr double kTauOracleTol = 1e-12;
constexpr double kOracleBudgetSeconds = 60.0;
constexpr double kLearningBudgetSeconds = 1800.0;

using clk = std::chrono::steady_clock;

double seconds_since(clk::time_point t0) {
  return std::chrono::duration<double>(clk::now() - t0).count();
}

int g_failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void progress(const std::string& line) {
  std::fprintf(stderr, "  %s\n", line.c_str());
  std::fflush(stderr);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------- 1,2,3

struct SmallPair {
  LabeledGraph a, b;
  double exact = 0.0;
};

std::vector<SmallPair> small_pairs() {
  std::vector<SmallPair> pairs;
  Rng rng(4242);
  for (int k = 0; k < 200; ++k) {
    SmallPair p{random_graph(rng, 6, 3), random_graph(rng, 6, 3)};
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void criterion_1_2_3(std::vector<SmallPair>& pairs) {
  auto t0 = clk::now();
  int agree = 0;
  for (SmallPair& p : pairs) {
    double astar = ged_astar(p.a, p.b).distance;
    double brute = ged_bruteforce(p.a, p.b).distance;
    p.exact = astar;
    if (astar == brute) ++agree;
  }
  double elapsed = seconds_since(t0);
  report(1, agree == 200 && elapsed < kOracleBudgetSeconds,
         fmt("exact search equals brute force on %d/200 small pairs in %.1f s", agree, elapsed));

  int sandwiched = 0;
  for (const SmallPair& p : pairs) {
    bool ok = ged_hed(p.a, p.b).distance <= p.exact;
    for (int width : {1, 4, 32}) ok = ok && ged_beam(p.a, p.b, width).distance >= p.exact;
    for (LapSolver solver : {LapSolver::kHungarian, LapSolver::kJv})
      for (CostModel model : {CostModel::kLabelOnly, CostModel::kAugmented})
        ok = ok && ged_bipartite(p.a, p.b, solver, model).distance >= p.exact;
    if (ok) ++sandwiched;
  }
  report(2, sandwiched == 200,
         fmt("lower and upper bounds bracket the exact distance on %d/200 pairs "
             "(both cost models, beam widths 1/4/32)",
             sandwiched));

  int beam_exact = 0;
  for (const SmallPair& p : pairs)
    if (ged_beam(p.a, p.b, kUnboundedWidth).distance == p.exact) ++beam_exact;
  report(3, beam_exact == 200,
         fmt("unbounded beam equals the exact search on %d/200 pairs", beam_exact));
}

// ------------------------------------------------------------------- 4

void criterion_4() {
  Rng rng(4444);
  int enum_ok = 0;
  for (int k = 0; k < 100; ++k) {
    int n = rng.range(1, 7);
    CostMatrix c(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c.at(i, j) = rng.uniform(0.0, 10.0);
    double oracle = lap_bruteforce(c);
    if (std::abs(solve_lap_hungarian(c).total_cost - oracle) <= kLapTol &&
        std::abs(solve_lap_jv(c).total_cost - oracle) <= kLapTol)
      ++enum_ok;
  }
  int agree_ok = 0;
  for (int k = 0; k < 1000; ++k) {
    int n = rng.range(2, 50);
    CostMatrix c(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c.at(i, j) = rng.uniform(0.0, 10.0);
    if (std::abs(solve_lap_hungarian(c).total_cost - solve_lap_jv(c).total_cost) <= kLapTol)
      ++agree_ok;
  }
  report(4, enum_ok == 100 && agree_ok == 1000,
         fmt("assignment solvers match enumeration on %d/100 matrices and each other on "
             "%d/1000 matrices",
             enum_ok, agree_ok));
}

// ------------------------------------------------------------------- 5

void criterion_5() {
  Rng rng(4555);
  int ok = 0;
  for (int k = 0; k < 50; ++k) {
    std::vector<Embedding> x(3), y(3);
    for (auto& e : x) e = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    for (auto& e : y) e = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    if (std::abs(solve_transportation(x, y).cost - transport_bruteforce(x, y)) <= kTransportTol)
      ++ok;
  }
  report(5, ok == 50,
         fmt("transportation solver matches basic-feasible enumeration on %d/50 instances", ok));
}

// ------------------------------------------------------------------- 6

using Builder = std::function<ad::NodeId(ad::Graph&, const std::vector<ad::NodeId>&)>;

double eval_scalar(const std::vector<ad::Tensor>& inputs, const Builder& build) {
  ad::Graph g;
  std::vector<ad::NodeId> ids;
  for (const auto& t : inputs) ids.push_back(g.input(t, true));
  return g.value(build(g, ids))[0];
}

double max_grad_err(const std::vector<ad::Tensor>& inputs, const Builder& build) {
  const double eps = 1e-4;
  ad::Graph g;
  std::vector<ad::NodeId> ids;
  for (const auto& t : inputs) ids.push_back(g.input(t, true));
  ad::NodeId loss = build(g, ids);
  g.backward(loss);
  double worst = 0.0;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    const ad::Tensor& analytic = g.grad(ids[p]);
    for (std::int64_t i = 0; i < inputs[p].numel(); ++i) {
      auto plus = inputs;
      auto minus = inputs;
      plus[p][i] += eps;
      minus[p][i] -= eps;
      double fd = (eval_scalar(plus, build) - eval_scalar(minus, build)) / (2.0 * eps);
      double a = analytic[i];
      worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1.0}));
    }
  }
  return worst;
}

ad::Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  ad::Tensor t(std::move(shape));
  for (auto& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

// entries pushed away from zero so relu stays off its kink under the step
ad::Tensor offset_tensor(std::vector<int> shape, Rng& rng) {
  ad::Tensor t(std::move(shape));
  for (auto& x : t.data) x = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.05, 1.0);
  return t;
}

// distinct spaced entries keep pooling argmaxes stable under the step
ad::Tensor spread_tensor(std::vector<int> shape, Rng& rng) {
  ad::Tensor t(std::move(shape));
  std::vector<double> grid(t.data.size());
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.05 * static_cast<double>(i);
  rng.shuffle(grid);
  t.data = grid;
  return t;
}

ad::NodeId project(ad::Graph& g, ad::NodeId y, std::uint64_t seed) {
  Rng rng(seed);
  ad::Tensor c = rand_tensor(g.value(y).shape, rng);
  return g.dot(y, g.input(std::move(c), false));
}

void criterion_6() {
  Rng rng(4666);
  struct Probe {
    const char* name;
    std::vector<ad::Tensor> inputs;
    Builder build;
  };

  ad::AggregateCoeffs path_coeffs;  // 4-node path with mixed weights
  for (int i = 0; i < 4; ++i) {
    std::vector<std::pair<int, double>> row{{i, 0.5}};
    if (i > 0) row.push_back({i - 1, 0.4});
    if (i < 3) row.push_back({i + 1, 0.3});
    path_coeffs.push_back(std::move(row));
  }
  ad::Tensor mse_target = rand_tensor({6}, rng);

  std::vector<Probe> probes;
  probes.push_back({"matmul",
                    {rand_tensor({2, 3}, rng), rand_tensor({3, 4}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.matmul(in[0], in[1]), 9001);
                    }});
  probes.push_back({"matmul_nt",
                    {rand_tensor({2, 3}, rng), rand_tensor({4, 3}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.matmul_nt(in[0], in[1]), 9002);
                    }});
  probes.push_back({"gcn_aggregate",
                    {rand_tensor({4, 3}, rng)},
                    [path_coeffs](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.gcn_aggregate(in[0], path_coeffs), 9003);
                    }});
  probes.push_back({"add",
                    {rand_tensor({2, 3}, rng), rand_tensor({2, 3}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.add(in[0], in[1]), 9004);
                    }});
  probes.push_back({"add_bias",
                    {rand_tensor({3, 4}, rng), rand_tensor({4}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.add_bias(in[0], in[1]), 9005);
                    }});
  probes.push_back({"relu",
                    {offset_tensor({3, 4}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.relu(in[0]), 9006);
                    }});
  probes.push_back({"sigmoid",
                    {rand_tensor({2, 3}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.sigmoid(in[0]), 9007);
                    }});
  probes.push_back({"conv2d",
                    {rand_tensor({1, 2, 5, 5}, rng), rand_tensor({3, 2, 3, 3}, rng),
                     rand_tensor({3}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.conv2d(in[0], in[1], in[2], 3), 9008);
                    }});
  probes.push_back({"maxpool2d",
                    {spread_tensor({1, 2, 6, 6}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.maxpool2d(in[0], 4), 9009);
                    }});
  probes.push_back({"resize_bilinear",
                    {rand_tensor({1, 1, 4, 4}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.resize_bilinear(in[0], 7, 7), 9010);
                    }});
  probes.push_back({"reshape",
                    {rand_tensor({2, 6}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.reshape(in[0], {3, 4}), 9011);
                    }});
  probes.push_back({"gather_rows_pad",
                    {rand_tensor({4, 3}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.gather_rows_pad(in[0], {2, 0, 3}, 6), 9012);
                    }});
  probes.push_back({"mean_rows",
                    {rand_tensor({5, 3}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return project(g, g.mean_rows(in[0]), 9013);
                    }});
  probes.push_back({"dot",
                    {rand_tensor({7}, rng), rand_tensor({7}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return g.dot(in[0], in[1]);
                    }});
  probes.push_back({"stack_scalars",
                    {rand_tensor({2}, rng), rand_tensor({2}, rng), rand_tensor({2}, rng)},
                    [](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      std::vector<ad::NodeId> parts{g.dot(in[0], in[0]), g.dot(in[1], in[2]),
                                                    g.dot(in[2], in[2])};
                      return project(g, g.stack_scalars(parts), 9015);
                    }});
  probes.push_back({"mse_loss",
                    {rand_tensor({6}, rng)},
                    [mse_target](ad::Graph& g, const std::vector<ad::NodeId>& in) {
                      return g.mse_loss(in[0], mse_target);
                    }});

  double worst = 0.0;
  std::string worst_name = "none";
  for (const Probe& p : probes) {
    double err = max_grad_err(p.inputs, p.build);
    if (err > worst) {
      worst = err;
      worst_name = p.name;
    }
  }
  bool primitives_ok = worst < kGradTol;

  // end to end: two-pair batch loss against central differences. A fresh
  // init zeroes every bias, which parks the zero padded similarity map
  // regions exactly on the relu kink; nudge all biases to a generic point.
  ModelConfig mc;
  mc.gcn_dims = {5, 4};
  mc.input_dim = 3;
  mc.cnn_spec = "conv(3,1,1,4),maxpool(4),conv(3,1,4,6),maxpool(3)";
  mc.dense_dims = {6, 3, 1};
  Checkpoint ckpt;
  ckpt.kind = ModelKind::kGsimcnn;
  ckpt.config = mc;
  Rng prng(4667);
  ckpt.params = ModelParams::init(mc, prng);
  for (ad::Tensor* t : ckpt.params.flat())
    if (t->rank() == 1)
      for (auto& x : t->data) x = (prng.bernoulli(0.5) ? 1.0 : -1.0) * prng.uniform(0.05, 0.3);

  std::vector<LabeledGraph> graphs;
  Rng grng(4668);
  for (int k = 0; k < 4; ++k) graphs.push_back(generate_graph(5, 0.4, 3, grng.next_u64(), true));
  std::vector<TrainingPair> batch{{0, 1, 0.7}, {2, 3, 0.4}};

  ad::Graph tape;
  TapeParams tp = stage_params(tape, ckpt.params, true);
  std::vector<ad::NodeId> scores;
  ad::Tensor targets({2});
  for (std::size_t k = 0; k < batch.size(); ++k) {
    scores.push_back(
        pair_score(tape, tp, mc, ckpt.kind, graphs[batch[k].i], graphs[batch[k].j]));
    targets[k] = batch[k].target;
  }
  ad::NodeId loss = tape.mse_loss(tape.stack_scalars(scores), targets);
  tape.backward(loss);

  const double eps = 1e-5;
  double worst_e2e = 0.0;
  auto flat = ckpt.params.flat();
  for (std::size_t t = 0; t < flat.size(); ++t) {
    const ad::Tensor& analytic = tape.grad(tp.flat[t]);
    for (std::int64_t i : {std::int64_t{0}, flat[t]->numel() / 2, flat[t]->numel() - 1}) {
      Checkpoint probe = ckpt;
      probe.params.flat()[t]->data[i] += eps;
      double up = batch_loss(graphs, batch, probe);
      probe.params.flat()[t]->data[i] -= 2 * eps;
      double down = batch_loss(graphs, batch, probe);
      double fd = (up - down) / (2.0 * eps);
      double a = analytic[i];
      worst_e2e = std::max(worst_e2e, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1.0}));
    }
  }
  bool e2e_ok = worst_e2e < kEndToEndGradTol;

  report(6, primitives_ok && e2e_ok,
         fmt("finite differences: worst primitive error %.2e (%s, tol %.0e), "
             "two-pair batch loss error %.2e (tol %.0e)",
             worst, worst_name.c_str(), kGradTol, worst_e2e, kEndToEndGradTol));
}

// ------------------------------------------------------------------- 7

void criterion_7() {
  Rng rng(4777);
  std::vector<LabeledGraph> graphs;
  while (graphs.size() < 50) {
    LabeledGraph g = random_graph(rng, 8, 3);
    if (has_unique_bfs_keys(g)) graphs.push_back(std::move(g));
  }

  ModelConfig mc;
  mc.input_dim = 3;
  Checkpoint ckpt;
  ckpt.kind = ModelKind::kGsimcnn;
  ckpt.config = mc;
  Rng prng(4778);
  ckpt.params = ModelParams::init(mc, prng);

  int stable = 0;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const LabeledGraph& partner = graphs[(k + 1) % graphs.size()];
    double base = model_forward(graphs[k], partner, ckpt);
    bool ok = true;
    for (int t = 0; t < 10; ++t) {
      NodeOrdering p = random_permutation(rng, graphs[k].node_count());
      LabeledGraph shuffled = permute_graph(graphs[k], p);
      ok = ok && model_forward(shuffled, partner, ckpt) == base &&
           model_forward(partner, shuffled, ckpt) == model_forward(partner, graphs[k], ckpt);
    }
    if (ok) ++stable;
  }
  report(7, stable == 50,
         fmt("model score bit-identical under node renumbering on %d/50 graphs x10 "
             "permutations",
             stable));
}

// ------------------------------------------------------------------- 8

void criterion_8() {
  ModelConfig mc;
  mc.gcn_dims = {6, 5};
  mc.input_dim = 3;
  Rng prng(4888);
  ModelParams params = ModelParams::init(mc, prng);

  Rng rng(4889);
  int ok_count = 0;
  for (int k = 0; k < 100; ++k) {
    LabeledGraph g = random_graph(rng, 8, 3);
    NodeOrdering p = random_permutation(rng, g.node_count());
    ad::Tensor base = gcn_encode(g, params, mc);
    ad::Tensor perm = gcn_encode(permute_graph(g, p), params, mc);
    const int d = base.dim(1);
    bool ok = perm.shape == base.shape;
    for (int r = 0; ok && r < g.node_count(); ++r)
      for (int c = 0; ok && c < d; ++c) ok = perm.data[r * d + c] == base.data[p[r] * d + c];
    if (ok) ++ok_count;
  }
  report(8, ok_count == 100,
         fmt("embedding rows permute exactly with the nodes on %d/100 graphs", ok_count));
}

// ------------------------------------------------------------------- 9

void criterion_9() {
  int passes = 0, runs = 0;
  std::string detail;
  for (std::uint64_t seed : {7, 8, 9}) {
    if (passes >= 2) break;
    ++runs;
    auto t0 = clk::now();
    progress(fmt("learning run, seed %llu: generating corpus and ground truth",
                 static_cast<unsigned long long>(seed)));
    GenParams gen;  // 300 connected graphs, 5..10 nodes, 3 labels, 60/20/20
    Dataset ds = generate_dataset(gen, seed, "acceptance");
    GroundTruthPolicy policy;
    PairFile pf = compute_ground_truth(ds, policy);

    std::vector<TrainingPair> train = training_pairs(ds, pf, PairRole::kTrain);
    std::vector<TrainingPair> val = training_pairs(ds, pf, PairRole::kVal);
    ModelConfig mc;
    mc.input_dim = ds.label_width();
    TrainOptions opts;  // 2000 iterations, batch 32

    progress(fmt("learning run, seed %llu: training both models (%d fallbacks in ground truth)",
                 static_cast<unsigned long long>(seed), pf.fallbacks));
    TrainResult gsim = train_model(ds.graphs, train, val, mc, ModelKind::kGsimcnn, seed, opts);
    TrainResult emb = train_model(ds.graphs, train, val, mc, ModelKind::kEmbAvg, seed, opts);

    EvalResult eg = evaluate_method(ds, pf, "gsimcnn", &gsim.best);
    EvalResult ee = evaluate_method(ds, pf, "embavg", &emb.best);
    double elapsed = seconds_since(t0);

    bool pass = eg.report.mse < ee.report.mse && eg.report.mean_rho >= 0.5 &&
                elapsed < kLearningBudgetSeconds;
    if (pass) ++passes;
    std::string line = fmt("seed %llu: mse %.5f vs %.5f, rho %.3f, %.0f s -> %s",
                           static_cast<unsigned long long>(seed), eg.report.mse, ee.report.mse,
                           eg.report.mean_rho, elapsed, pass ? "pass" : "fail");
    progress("learning run, " + line);
    if (!detail.empty()) detail += "; ";
    detail += line;
  }
  report(9, passes >= 2,
         fmt("learned model beats the embedding baseline on %d/%d seeds (%s)", passes, runs,
             detail.c_str()));
}

// ------------------------------------------------------------------ 10

double tau_counting_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  std::int64_t concordant = 0, discordant = 0, x_tied = 0, y_tied = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0)
        ++x_tied;
      else if (dy == 0.0)
        ++y_tied;
      else if ((dx > 0) == (dy > 0))
        ++concordant;
      else
        ++discordant;
    }
  double denom = std::sqrt(static_cast<double>(concordant + discordant + x_tied)) *
                 std::sqrt(static_cast<double>(concordant + discordant + y_tied));
  return (concordant - discordant) / denom;
}

void criterion_10() {
  bool ok = true;
  auto expect = [&](bool cond) { ok = ok && cond; };

  expect(nged(0.0, 4, 4) == 0.0);
  expect(nged(3.0, 6, 6) == 0.5);
  expect(nged(3.0, 5, 7) == 0.5);
  expect(ged_to_sim(0.0) == 1.0);
  expect(std::abs(ged_to_sim(0.5) - 0.6065306597126334) <= 1e-9);

  std::vector<double> base{1, 2, 3, 4, 5};
  expect(std::abs(spearman_rho(base, base) - 1.0) <= kMetricTol);
  expect(std::abs(spearman_rho(base, {5, 4, 3, 2, 1}) + 1.0) <= kMetricTol);
  expect(std::abs(spearman_rho(base, {1, 2, 3, 5, 4}) - 0.9) <= kMetricTol);
  expect(std::abs(kendall_tau(base, base) - 1.0) <= kMetricTol);
  expect(std::abs(kendall_tau(base, {5, 4, 3, 2, 1}) + 1.0) <= kMetricTol);

  // top-2 of the prediction picks ids {0,3}, truth picks {0,1}: half right
  expect(precision_at_k({9, 1, 0, 8}, {9, 8, 1, 0}, 2) == 0.5);
  expect(precision_at_k({1, 2, 3}, {1, 2, 3}, 3) == 1.0);
  expect(precision_at_k({3, 2, 1}, {1, 2, 3}, 1) == 0.0);

  Rng rng(4100);
  int tau_ok = 0;
  for (int k = 0; k < 100; ++k) {
    int n = rng.range(5, 60);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng.range(0, 6));  // small alphabet forces ties
      y[i] = static_cast<double>(rng.range(0, 6));
    }
    try {
      double fast = kendall_tau(x, y);
      if (std::abs(fast - tau_counting_oracle(x, y)) <= kTauOracleTol) ++tau_ok;
    } catch (const DegenerateRankingError&) {
      // constant vector drawn; both definitions degenerate, count as agreement
      ++tau_ok;
    }
  }
  expect(tau_ok == 100);

  report(10, ok, fmt("hand examples reproduced, tau fast path matches counting on %d/100 vectors",
                     tau_ok));
}

// ------------------------------------------------------------------ 11

void criterion_11() {
  ModelConfig mc;  // defaults
  bool shape_ok = false;
  try {
    validate_config(mc);
    Rng rng(4111);
    ad::Graph g;
    ad::NodeId x = g.input(rand_tensor({1, 1, 10, 10}, rng), false);
    Rng wrng(4112);
    for (const CnnOp& op : parse_cnn_spec(mc.cnn_spec)) {
      if (op.is_pool) {
        x = g.maxpool2d(x, op.pool_size);
      } else {
        ad::NodeId w = g.input(
            ad::glorot({op.out_channels, op.in_channels, op.window, op.window}, wrng), false);
        ad::NodeId b = g.input(ad::Tensor({op.out_channels}), false);
        x = g.relu(g.conv2d(x, w, b, op.window));
      }
    }
    shape_ok = g.value(x).shape == std::vector<int>{1, 128, 1, 1};
  } catch (const std::exception&) {
    shape_ok = false;
  }

  bool rejects = false;
  ModelConfig bad = mc;
  bad.cnn_spec = "conv(3,1,1,128)";  // spatial side stays at 10
  try {
    validate_config(bad);
  } catch (const std::invalid_argument&) {
    rejects = true;
  }
  bool rejects_chain = false;
  bad.cnn_spec = "conv(3,1,1,16),conv(3,1,8,128)";  // channel chain breaks
  try {
    validate_config(bad);
  } catch (const std::invalid_argument&) {
    rejects_chain = true;
  }

  report(11, shape_ok && rejects && rejects_chain,
         fmt("default image head maps 10x10x1 to 1x1x128: %s; non-collapsing and chain-broken "
             "stacks rejected: %s/%s",
             shape_ok ? "yes" : "no", rejects ? "yes" : "no", rejects_chain ? "yes" : "no"));
}

// ------------------------------------------------------------------ 12

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool run_cli(const std::string& args) {
  std::string cmd = std::string(GEDFORGE_BIN) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

void criterion_12() {
  fs::path base = fs::temp_directory_path() / "gedforge_acceptance_repro";
  fs::remove_all(base);
  fs::path a = base / "a", b = base / "b";
  fs::create_directories(a);
  fs::create_directories(b);
  std::string cfg = (base / "cfg.json").string();
  std::ofstream(cfg) << R"cfg({
    "generator": {"count": 40, "min_nodes": 4, "max_nodes": 7, "edge_prob": 0.4, "labels": 3},
    "ground_truth": {"exact_max_nodes": 7},
    "model": {"gcn_dims": [8, 6],
              "cnn_spec": "conv(3,1,1,4),maxpool(4),conv(3,1,4,6),maxpool(3)",
              "dense_dims": [6, 3, 1]},
    "training": {"iterations": 60, "batch_size": 8, "validation_interval": 20,
                 "validation_subsample": 100}
  })cfg";

  bool cli_ok = true;
  for (const fs::path& dir : {a, b}) {
    std::string common = "--seed 12 --config " + cfg + " --out " + dir.string() + " ";
    cli_ok = cli_ok && run_cli(common + "gen");
    cli_ok = cli_ok && run_cli(common + "groundtruth");
    cli_ok = cli_ok && run_cli(common + "train --model gsimcnn");
    cli_ok = cli_ok && run_cli(common + "eval --methods hungarian gsimcnn --checkpoint " +
                               (dir / "checkpoint_gsimcnn.bin").string());
  }

  // and train a second time over the same inputs within one directory
  std::string first = slurp(a / "checkpoint_gsimcnn.bin");
  cli_ok = cli_ok && run_cli("--seed 12 --config " + cfg + " --out " + a.string() +
                             " train --model gsimcnn");

  bool ckpt_stable = !first.empty() && first == slurp(a / "checkpoint_gsimcnn.bin");
  bool ckpt_match = first == slurp(b / "checkpoint_gsimcnn.bin");
  bool reports_match =
      slurp(a / "report_gsimcnn.json") == slurp(b / "report_gsimcnn.json") &&
      slurp(a / "report_hungarian.json") == slurp(b / "report_hungarian.json") &&
      !slurp(a / "report_gsimcnn.json").empty();
  fs::remove_all(base);

  report(12, cli_ok && ckpt_stable && ckpt_match && reports_match,
         fmt("pipeline reruns byte-identical (commands ok: %s, checkpoint stable: %s, "
             "cross-run checkpoint: %s, reports: %s)",
             cli_ok ? "yes" : "no", ckpt_stable ? "yes" : "no", ckpt_match ? "yes" : "no",
             reports_match ? "yes" : "no"));
}

}  // namespace

int main() {
  auto t0 = clk::now();
  std::vector<SmallPair> pairs = small_pairs();
  criterion_1_2_3(pairs);
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  std::printf("acceptance: %d/12 criteria passed in %.0f s\n", 12 - g_failures,
              seconds_since(t0));
  return g_failures;
}
