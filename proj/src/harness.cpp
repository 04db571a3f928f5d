#include "gedforge/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "gedforge/assignment.hpp"
#include "json.hpp"

namespace gedforge {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing file: " + path);
}

nlohmann::json gen_to_json(const GenParams& g) {
  return {{"count", g.count},       {"min_nodes", g.min_nodes}, {"max_nodes", g.max_nodes},
          {"edge_prob", g.edge_prob}, {"labels", g.labels},     {"connected", g.connected},
          {"train_frac", g.train_frac}, {"val_frac", g.val_frac}, {"test_frac", g.test_frac}};
}

GenParams gen_from_json(const nlohmann::json& j) {
  GenParams g;
  g.count = j.at("count").get<int>();
  g.min_nodes = j.at("min_nodes").get<int>();
  g.max_nodes = j.at("max_nodes").get<int>();
  g.edge_prob = j.at("edge_prob").get<double>();
  g.labels = j.at("labels").get<int>();
  g.connected = j.at("connected").get<bool>();
  g.train_frac = j.at("train_frac").get<double>();
  g.val_frac = j.at("val_frac").get<double>();
  g.test_frac = j.at("test_frac").get<double>();
  return g;
}

// runs fn(k) for k in [0, count) across workers, rethrowing the first error
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  int workers = std::max(1, threads);
  if (workers == 1 || count < 2) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_lock;
  auto body = [&] {
    try {
      while (true) {
        std::size_t k = next.fetch_add(1);
        if (k >= count) return;
        fn(k);
      }
    } catch (...) {
      std::lock_guard<std::mutex> hold(error_lock);
      if (!error) error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double similarity_from_ged(double ged, const LabeledGraph& a, const LabeledGraph& b) {
  return ged_to_sim(nged(ged, a.node_count(), b.node_count()));
}

}  // namespace

std::string config_hash_hex(const std::string& canonical) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int Dataset::label_width() const {
  int width = std::max(1, gen.labels);
  for (const LabeledGraph& g : graphs) width = std::max(width, label_alphabet_size(g));
  return width;
}

Dataset generate_dataset(const GenParams& params, std::uint64_t seed,
                         const std::string& config_hash) {
  require(params.count >= 1, "graph count must be positive");
  require(params.min_nodes >= 1 && params.min_nodes <= params.max_nodes,
          "node count range is empty");
  require(params.labels >= 1, "label alphabet must be non-empty");
  require(params.edge_prob >= 0.0 && params.edge_prob <= 1.0, "edge probability outside [0,1]");
  double frac_sum = params.train_frac + params.val_frac + params.test_frac;
  require(std::abs(frac_sum - 1.0) < 1e-9, "split fractions must sum to 1");
  require(params.train_frac > 0.0 && params.val_frac > 0.0 && params.test_frac > 0.0,
          "every split must be non-empty");

  Dataset ds;
  ds.seed = seed;
  ds.config_hash = config_hash;
  ds.gen = params;

  Rng gen_rng = Rng::substream(seed, "gen");
  for (int k = 0; k < params.count; ++k) {
    int n = gen_rng.range(params.min_nodes, params.max_nodes);
    ds.graphs.push_back(
        generate_graph(n, params.edge_prob, params.labels, gen_rng.next_u64(), params.connected));
  }

  std::vector<int> ids(params.count);
  for (int k = 0; k < params.count; ++k) ids[k] = k;
  Rng split_rng = Rng::substream(seed, "split");
  split_rng.shuffle(ids);
  int n_train = static_cast<int>(std::lround(params.train_frac * params.count));
  int n_val = static_cast<int>(std::lround(params.val_frac * params.count));
  n_train = std::max(1, std::min(n_train, params.count - 2));
  n_val = std::max(1, std::min(n_val, params.count - n_train - 1));
  ds.train_ids.assign(ids.begin(), ids.begin() + n_train);
  ds.val_ids.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  ds.test_ids.assign(ids.begin() + n_train + n_val, ids.end());
  std::sort(ds.train_ids.begin(), ds.train_ids.end());
  std::sort(ds.val_ids.begin(), ds.val_ids.end());
  std::sort(ds.test_ids.begin(), ds.test_ids.end());
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  nlohmann::json j;
  j["seed"] = ds.seed;
  j["config_hash"] = ds.config_hash;
  j["generator"] = gen_to_json(ds.gen);
  nlohmann::json graphs = nlohmann::json::array();
  for (const LabeledGraph& g : ds.graphs) graphs.push_back(graph_to_json(g));
  j["graphs"] = std::move(graphs);
  j["split"] = {{"train", ds.train_ids}, {"val", ds.val_ids}, {"test", ds.test_ids}};
  write_file(path, j.dump(2) + "\n");
}

Dataset load_dataset(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  Dataset ds;
  ds.seed = j.at("seed").get<std::uint64_t>();
  ds.config_hash = j.at("config_hash").get<std::string>();
  ds.gen = gen_from_json(j.at("generator"));
  for (const auto& g : j.at("graphs")) ds.graphs.push_back(parse_graph_json(g));
  ds.train_ids = j.at("split").at("train").get<std::vector<int>>();
  ds.val_ids = j.at("split").at("val").get<std::vector<int>>();
  ds.test_ids = j.at("split").at("test").get<std::vector<int>>();

  std::vector<char> seen(ds.graphs.size(), 0);
  auto mark = [&](const std::vector<int>& ids) {
    for (int id : ids) {
      require(id >= 0 && id < static_cast<int>(ds.graphs.size()), "split id out of range");
      require(!seen[id], "split lists overlap");
      seen[id] = 1;
    }
  };
  mark(ds.train_ids);
  mark(ds.val_ids);
  mark(ds.test_ids);
  for (char s : seen) require(s, "split does not cover every graph");
  return ds;
}

std::vector<std::pair<int, int>> pair_universe(const Dataset& ds, PairRole role) {
  std::vector<std::pair<int, int>> out;
  if (role == PairRole::kTrain) {
    for (std::size_t a = 0; a < ds.train_ids.size(); ++a)
      for (std::size_t b = a; b < ds.train_ids.size(); ++b)
        out.push_back({ds.train_ids[a], ds.train_ids[b]});
  } else if (role == PairRole::kVal) {
    for (int v : ds.val_ids)
      for (int t : ds.train_ids) out.push_back({v, t});
  } else {
    std::vector<int> candidates = ds.train_ids;
    candidates.insert(candidates.end(), ds.val_ids.begin(), ds.val_ids.end());
    std::sort(candidates.begin(), candidates.end());
    for (int q : ds.test_ids)
      for (int c : candidates) out.push_back({q, c});
  }
  return out;
}

double min_upper_bound(const LabeledGraph& a, const LabeledGraph& b, int beam_width) {
  double best = ged_beam(a, b, beam_width).distance;
  best = std::min(best, ged_bipartite(a, b, LapSolver::kHungarian).distance);
  best = std::min(best, ged_bipartite(a, b, LapSolver::kJv).distance);
  return best;
}

std::string pair_config_hash(const std::string& dataset_hash, const GroundTruthPolicy& policy) {
  return config_hash_hex(dataset_hash + "|groundtruth|" + std::to_string(policy.exact_max_nodes) +
                         "," + std::to_string(policy.beam_width) + "," +
                         std::to_string(policy.astar_budget));
}

PairFile compute_ground_truth(const Dataset& ds, const GroundTruthPolicy& policy) {
  require(policy.beam_width >= 1, "beam width must be positive");
  require(policy.exact_max_nodes >= 0, "exact threshold must be non-negative");

  struct Slot {
    std::pair<int, int> pair;
    PairRole role;
  };
  std::vector<Slot> slots;
  for (PairRole role : {PairRole::kTrain, PairRole::kVal, PairRole::kTest})
    for (auto pr : pair_universe(ds, role)) slots.push_back({pr, role});

  PairFile pf;
  pf.seed = ds.seed;
  pf.policy = policy;
  pf.config_hash = pair_config_hash(ds.config_hash, policy);
  pf.pairs.resize(slots.size());
  std::atomic<int> fallbacks{0};

  parallel_for(slots.size(), policy.threads, [&](std::size_t k) {
    const auto [i, j] = slots[k].pair;
    const LabeledGraph& a = ds.graphs[i];
    const LabeledGraph& b = ds.graphs[j];
    LabeledPair out;
    out.i = i;
    out.j = j;
    out.role = slots[k].role;
    if (i == j) {
      out.ged = 0.0;
      out.kind = GroundTruthKind::kExact;
      pf.pairs[k] = out;
      return;
    }
    if (std::max(a.node_count(), b.node_count()) <= policy.exact_max_nodes) {
      AstarOptions opts;
      opts.max_nodes = policy.exact_max_nodes;
      opts.expansion_budget = policy.astar_budget;
      try {
        out.ged = ged_astar(a, b, opts).distance;
        out.kind = GroundTruthKind::kExact;
        pf.pairs[k] = out;
        return;
      } catch (const SearchBudgetError&) {
        fallbacks.fetch_add(1);
      }
    }
    out.ged = min_upper_bound(a, b, policy.beam_width);
    out.kind = GroundTruthKind::kUpperBoundMin;
    pf.pairs[k] = out;
  });

  pf.fallbacks = fallbacks.load();
  return pf;
}

void save_pairs(const std::string& path, const PairFile& pf) {
  nlohmann::json j;
  j["seed"] = pf.seed;
  j["config_hash"] = pf.config_hash;
  j["policy"] = {{"exact_max_nodes", pf.policy.exact_max_nodes},
                 {"beam_width", pf.policy.beam_width},
                 {"astar_budget", pf.policy.astar_budget}};
  j["fallbacks"] = pf.fallbacks;
  nlohmann::json pairs = nlohmann::json::array();
  for (const LabeledPair& p : pf.pairs) {
    const char* role = p.role == PairRole::kTrain ? "train" : p.role == PairRole::kVal ? "val" : "test";
    pairs.push_back({{"i", p.i},
                     {"j", p.j},
                     {"ged", p.ged},
                     {"kind", p.kind == GroundTruthKind::kExact ? "exact" : "ub"},
                     {"role", role}});
  }
  j["pairs"] = std::move(pairs);
  write_file(path, j.dump() + "\n");
}

PairFile load_pairs(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  PairFile pf;
  pf.seed = j.at("seed").get<std::uint64_t>();
  pf.config_hash = j.at("config_hash").get<std::string>();
  pf.policy.exact_max_nodes = j.at("policy").at("exact_max_nodes").get<int>();
  pf.policy.beam_width = j.at("policy").at("beam_width").get<int>();
  pf.policy.astar_budget = j.at("policy").at("astar_budget").get<std::int64_t>();
  pf.fallbacks = j.at("fallbacks").get<int>();
  for (const auto& p : j.at("pairs")) {
    LabeledPair lp;
    lp.i = p.at("i").get<int>();
    lp.j = p.at("j").get<int>();
    lp.ged = p.at("ged").get<double>();
    std::string kind = p.at("kind").get<std::string>();
    require(kind == "exact" || kind == "ub", "unknown pair kind");
    lp.kind = kind == "exact" ? GroundTruthKind::kExact : GroundTruthKind::kUpperBoundMin;
    std::string role = p.at("role").get<std::string>();
    require(role == "train" || role == "val" || role == "test", "unknown pair role");
    lp.role = role == "train" ? PairRole::kTrain : role == "val" ? PairRole::kVal : PairRole::kTest;
    pf.pairs.push_back(lp);
  }
  return pf;
}

std::vector<TrainingPair> training_pairs(const Dataset& ds, const PairFile& pf, PairRole role) {
  std::vector<TrainingPair> out;
  for (const LabeledPair& p : pf.pairs) {
    if (p.role != role) continue;
    require(p.ged >= 0.0, "pair without ground truth");
    require(p.i >= 0 && p.i < static_cast<int>(ds.graphs.size()) && p.j >= 0 &&
                p.j < static_cast<int>(ds.graphs.size()),
            "pair index out of range");
    out.push_back({p.i, p.j, similarity_from_ged(p.ged, ds.graphs[p.i], ds.graphs[p.j])});
  }
  return out;
}

EvalResult evaluate_method(const Dataset& ds, const PairFile& pf, const std::string& method,
                           const Checkpoint* ckpt, int threads) {
  EvalResult result;
  result.method = method;
  result.query_ids = ds.test_ids;
  result.candidate_ids = ds.train_ids;
  result.candidate_ids.insert(result.candidate_ids.end(), ds.val_ids.begin(), ds.val_ids.end());
  std::sort(result.candidate_ids.begin(), result.candidate_ids.end());

  std::function<double(const LabeledGraph&, const LabeledGraph&)> score;
  if (method == "gsimcnn" || method == "embavg") {
    require(ckpt != nullptr, "method " + method + " needs a checkpoint");
    ModelKind want = method == "gsimcnn" ? ModelKind::kGsimcnn : ModelKind::kEmbAvg;
    require(ckpt->kind == want, "checkpoint was trained for a different method");
    score = [ckpt](const LabeledGraph& a, const LabeledGraph& b) {
      return model_forward(a, b, *ckpt);
    };
  } else if (method.rfind("beam:", 0) == 0) {
    int width = 0;
    try {
      width = std::stoi(method.substr(5));
    } catch (const std::exception&) {
      require(false, "malformed beam width in method: " + method);
    }
    require(width >= 1, "beam width must be positive");
    score = [width](const LabeledGraph& a, const LabeledGraph& b) {
      return similarity_from_ged(ged_beam(a, b, width).distance, a, b);
    };
  } else if (method == "hungarian" || method == "vj") {
    LapSolver solver = method == "hungarian" ? LapSolver::kHungarian : LapSolver::kJv;
    score = [solver](const LabeledGraph& a, const LabeledGraph& b) {
      return similarity_from_ged(ged_bipartite(a, b, solver).distance, a, b);
    };
  } else if (method == "hed") {
    score = [](const LabeledGraph& a, const LabeledGraph& b) {
      return similarity_from_ged(ged_hed(a, b).distance, a, b);
    };
  } else {
    require(false, "unknown method: " + method);
  }

  std::unordered_map<std::int64_t, double> truth_sim;
  const std::int64_t stride = static_cast<std::int64_t>(ds.graphs.size());
  for (const LabeledPair& p : pf.pairs) {
    if (p.role != PairRole::kTest) continue;
    require(p.ged >= 0.0, "pair without ground truth");
    truth_sim[p.i * stride + p.j] = similarity_from_ged(p.ged, ds.graphs[p.i], ds.graphs[p.j]);
  }

  const int q = static_cast<int>(result.query_ids.size());
  const int m = static_cast<int>(result.candidate_ids.size());
  std::vector<std::vector<double>> predicted(q, std::vector<double>(m));
  std::vector<std::vector<double>> truth(q, std::vector<double>(m));
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < m; ++b) {
      auto at = truth_sim.find(result.query_ids[a] * stride + result.candidate_ids[b]);
      require(at != truth_sim.end(), "missing ground truth for a query candidate pair");
      truth[a][b] = at->second;
    }

  parallel_for(static_cast<std::size_t>(q), threads, [&](std::size_t a) {
    const LabeledGraph& qg = ds.graphs[result.query_ids[a]];
    for (int b = 0; b < m; ++b)
      predicted[a][b] = score(qg, ds.graphs[result.candidate_ids[b]]);
  });

  result.report = evaluate(predicted, truth);
  return result;
}

std::string eval_result_to_json(const EvalResult& r, std::uint64_t seed,
                                const std::string& config_hash) {
  nlohmann::json j;
  j["method"] = r.method;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["queries"] = r.query_ids;
  j["candidates"] = r.candidate_ids;
  j["report"] = nlohmann::json::parse(report_to_json(r.report));
  return j.dump(2) + "\n";
}

std::string eval_result_to_csv(const EvalResult& r, std::uint64_t seed,
                               const std::string& config_hash) {
  std::string csv = report_to_csv(r.report);
  std::size_t first_break = csv.find('\n');
  std::string header = csv.substr(0, first_break);
  std::string row = csv.substr(first_break + 1);
  if (!row.empty() && row.back() == '\n') row.pop_back();
  return header + ",method,seed,config_hash\n" + row + "," + r.method + "," +
         std::to_string(seed) + "," + config_hash + "\n";
}

BenchReport run_bench(const Dataset& ds, int pairs_per_size, std::uint64_t seed,
                      const std::string& config_hash, const Checkpoint* ckpt) {
  require(pairs_per_size >= 1, "need at least one pair per size");
  BenchReport report;
  report.seed = seed;
  report.config_hash = config_hash;

  std::map<int, std::vector<std::pair<int, int>>> by_size;
  const int n = static_cast<int>(ds.graphs.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      by_size[std::max(ds.graphs[i].node_count(), ds.graphs[j].node_count())].push_back({i, j});

  Rng rng = Rng::substream(seed, "bench");
  for (auto& [size, pairs] : by_size) {
    rng.shuffle(pairs);
    if (static_cast<int>(pairs.size()) > pairs_per_size) pairs.resize(pairs_per_size);
  }

  struct Method {
    std::string name;
    std::function<double(const LabeledGraph&, const LabeledGraph&)> run;
    int max_size;  // sizes beyond this are skipped
  };
  std::vector<Method> methods;
  methods.push_back({"hungarian",
                     [](const LabeledGraph& a, const LabeledGraph& b) {
                       return ged_bipartite(a, b, LapSolver::kHungarian).distance;
                     },
                     1 << 20});
  methods.push_back({"vj",
                     [](const LabeledGraph& a, const LabeledGraph& b) {
                       return ged_bipartite(a, b, LapSolver::kJv).distance;
                     },
                     1 << 20});
  methods.push_back(
      {"hed",
       [](const LabeledGraph& a, const LabeledGraph& b) { return ged_hed(a, b).distance; },
       1 << 20});
  methods.push_back({"beam:100",
                     [](const LabeledGraph& a, const LabeledGraph& b) {
                       return ged_beam(a, b, 100).distance;
                     },
                     1 << 20});
  methods.push_back({"astar",
                     [](const LabeledGraph& a, const LabeledGraph& b) {
                       return ged_astar(a, b).distance;
                     },
                     10});
  if (ckpt != nullptr)
    methods.push_back({ckpt->kind == ModelKind::kGsimcnn ? "gsimcnn" : "embavg",
                       [ckpt](const LabeledGraph& a, const LabeledGraph& b) {
                         return model_forward(a, b, *ckpt);
                       },
                       ckpt->kind == ModelKind::kGsimcnn ? ckpt->config.pad_to : 1 << 20});

  for (const Method& method : methods) {
    std::vector<std::pair<double, double>> log_points;
    for (const auto& [size, pairs] : by_size) {
      if (size > method.max_size || pairs.empty()) continue;
      volatile double sink = 0.0;
      auto started = std::chrono::steady_clock::now();
      for (const auto& [i, j] : pairs) sink = method.run(ds.graphs[i], ds.graphs[j]);
      auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               started)
                         .count();
      (void)sink;
      double mean_ms = elapsed / static_cast<double>(pairs.size());
      report.rows.push_back({method.name, size, mean_ms, static_cast<int>(pairs.size())});
      if (mean_ms > 0.0) log_points.push_back({std::log(size), std::log(mean_ms)});
    }
    if (log_points.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (auto [x, y] : log_points) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      double k = static_cast<double>(log_points.size());
      double denom = k * sxx - sx * sx;
      if (denom > 0) report.slopes[method.name] = (k * sxy - sx * sy) / denom;
    }
  }
  return report;
}

std::string bench_to_json(const BenchReport& b) {
  nlohmann::json j;
  j["seed"] = b.seed;
  j["config_hash"] = b.config_hash;
  nlohmann::json rows = nlohmann::json::array();
  for (const BenchRow& r : b.rows)
    rows.push_back({{"method", r.method}, {"size", r.size}, {"mean_ms", r.mean_ms},
                    {"pairs", r.pairs}});
  j["rows"] = std::move(rows);
  j["loglog_slopes"] = b.slopes;
  return j.dump(2) + "\n";
}

std::string bench_table(const BenchReport& b) {
  char line[128];
  std::string out = "method        size   pairs   mean_ms\n";
  for (const BenchRow& r : b.rows) {
    std::snprintf(line, sizeof line, "%-12s %5d %7d %9.4f\n", r.method.c_str(), r.size, r.pairs,
                  r.mean_ms);
    out += line;
  }
  out += "log-log slope estimates (time vs size):\n";
  for (const auto& [name, slope] : b.slopes) {
    std::snprintf(line, sizeof line, "%-12s %6.2f\n", name.c_str(), slope);
    out += line;
  }
  return out;
}

std::vector<RankEntry> rank_query(const Dataset& ds, const LabeledGraph& query,
                                  const Checkpoint& ckpt, int k, const PairFile* pf,
                                  int query_id) {
  require(k >= 1, "k must be positive");
  std::vector<int> candidates = ds.train_ids;
  candidates.insert(candidates.end(), ds.val_ids.begin(), ds.val_ids.end());
  std::sort(candidates.begin(), candidates.end());

  std::unordered_map<std::int64_t, double> ged_by_pair;
  const std::int64_t stride = static_cast<std::int64_t>(ds.graphs.size());
  if (pf != nullptr && query_id >= 0) {
    for (const LabeledPair& p : pf->pairs) {
      if (p.ged < 0.0) continue;
      ged_by_pair[p.i * stride + p.j] = p.ged;
      ged_by_pair[p.j * stride + p.i] = p.ged;
    }
  }

  std::vector<RankEntry> entries;
  for (int c : candidates) {
    RankEntry e;
    e.candidate_id = c;
    e.predicted = model_forward(query, ds.graphs[c], ckpt);
    auto at = ged_by_pair.find(static_cast<std::int64_t>(query_id) * stride + c);
    if (at != ged_by_pair.end())
      e.true_nged = nged(at->second, query.node_count(), ds.graphs[c].node_count());
    entries.push_back(e);
  }
  std::stable_sort(entries.begin(), entries.end(), [](const RankEntry& a, const RankEntry& b) {
    if (a.predicted != b.predicted) return a.predicted > b.predicted;
    return a.candidate_id < b.candidate_id;
  });
  if (static_cast<int>(entries.size()) > k) entries.resize(k);
  return entries;
}

}  // namespace gedforge
