#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gedforge/exact.hpp"
#include "gedforge/graph.hpp"
#include "gedforge/metrics.hpp"
#include "gedforge/model.hpp"

namespace gedforge {

// 64-bit FNV-1a over the canonical config text, hex encoded. Every artifact
// carries this next to the seed so reruns are attributable.
std::string config_hash_hex(const std::string& canonical);

struct GenParams {
  int count = 300;
  int min_nodes = 5;
  int max_nodes = 10;
  double edge_prob = 0.35;
  int labels = 3;
  bool connected = true;
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
};

struct Dataset {
  std::uint64_t seed = 0;
  std::string config_hash;
  GenParams gen;
  std::vector<LabeledGraph> graphs;
  std::vector<int> train_ids, val_ids, test_ids;

  int label_width() const;  // one-hot feature width covering every label
};

// Graph sizes and edges draw from substream "gen", split membership from
// substream "split". The split is a partition with round(frac*n) sizes.
Dataset generate_dataset(const GenParams& params, std::uint64_t seed,
                         const std::string& config_hash);

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

enum class PairRole { kTrain, kVal, kTest };

struct LabeledPair {
  int i = 0;
  int j = 0;
  double ged = -1.0;
  GroundTruthKind kind = GroundTruthKind::kUpperBoundMin;
  PairRole role = PairRole::kTrain;
};

struct GroundTruthPolicy {
  int exact_max_nodes = 10;
  int beam_width = 100;
  std::int64_t astar_budget = 4'000'000;
  int threads = 1;
};

struct PairFile {
  std::uint64_t seed = 0;
  std::string config_hash;
  GroundTruthPolicy policy;
  std::vector<LabeledPair> pairs;
  int fallbacks = 0;  // budget exhaustions that degraded to upper bounds
};

// Pair universes: training pairs are unordered pairs within the training
// split including self pairs; validation rows pair each validation graph
// with every training graph; test rows pair each test graph with every
// training and validation graph.
std::vector<std::pair<int, int>> pair_universe(const Dataset& ds, PairRole role);

// Hash carried by a pair file: the dataset hash folded together with the
// policy knobs that shaped the distances (thread count excluded).
std::string pair_config_hash(const std::string& dataset_hash, const GroundTruthPolicy& policy);

// Small pairs get the exact search; larger ones (or budget exhaustions,
// which are counted and reported) get the smallest of the beam and both
// bipartite upper bounds.
PairFile compute_ground_truth(const Dataset& ds, const GroundTruthPolicy& policy);

void save_pairs(const std::string& path, const PairFile& pf);
PairFile load_pairs(const std::string& path);

double min_upper_bound(const LabeledGraph& a, const LabeledGraph& b, int beam_width);

// Training-pair views with targets in similarity space.
std::vector<TrainingPair> training_pairs(const Dataset& ds, const PairFile& pf, PairRole role);

// A scoring method name: "gsimcnn", "embavg", "beam:<width>", "hungarian",
// "vj", or "hed". Model methods need their checkpoint.
struct EvalResult {
  std::string method;
  std::vector<int> query_ids;      // test graphs
  std::vector<int> candidate_ids;  // train and validation graphs, ascending
  RankingReport report;
};

EvalResult evaluate_method(const Dataset& ds, const PairFile& pf, const std::string& method,
                           const Checkpoint* ckpt, int threads = 1);

// Report artifact with the seed and config hash attached.
std::string eval_result_to_json(const EvalResult& r, std::uint64_t seed,
                                const std::string& config_hash);
std::string eval_result_to_csv(const EvalResult& r, std::uint64_t seed,
                               const std::string& config_hash);

struct BenchRow {
  std::string method;
  int size = 0;       // max of the two node counts
  double mean_ms = 0.0;
  int pairs = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::map<std::string, double> slopes;  // log time vs log size, least squares
  std::uint64_t seed = 0;
  std::string config_hash;
};

BenchReport run_bench(const Dataset& ds, int pairs_per_size, std::uint64_t seed,
                      const std::string& config_hash, const Checkpoint* ckpt);
std::string bench_to_json(const BenchReport& b);
std::string bench_table(const BenchReport& b);

struct RankEntry {
  int candidate_id = 0;
  double predicted = 0.0;
  double true_nged = -1.0;  // negative when no ground truth is on file
};

// Top k candidates from the train and validation splits by model score.
std::vector<RankEntry> rank_query(const Dataset& ds, const LabeledGraph& query,
                                  const Checkpoint& ckpt, int k, const PairFile* pf,
                                  int query_id = -1);

}  // namespace gedforge
