// Command line front end. Every artifact embeds the run seed and a hash of
// the fully resolved config, so outputs can always be traced back to their
// inputs. All commands are deterministic for a fixed seed and config; the
// thread flags only change wall time.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gedforge/harness.hpp"
#include "json.hpp"

using namespace gedforge;

namespace {

struct RunConfig {
  GenParams gen;
  GroundTruthPolicy policy;
  ModelConfig model;
  TrainOptions train;
};

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known)
      throw std::invalid_argument("unknown config key \"" + it.key() + "\" in " + where);
  }
}

RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  check_keys(j, {"generator", "ground_truth", "model", "training"}, "the config root");
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    check_keys(g,
               {"count", "min_nodes", "max_nodes", "edge_prob", "labels", "connected",
                "train_frac", "val_frac", "test_frac"},
               "generator");
    c.gen.count = g.value("count", c.gen.count);
    c.gen.min_nodes = g.value("min_nodes", c.gen.min_nodes);
    c.gen.max_nodes = g.value("max_nodes", c.gen.max_nodes);
    c.gen.edge_prob = g.value("edge_prob", c.gen.edge_prob);
    c.gen.labels = g.value("labels", c.gen.labels);
    c.gen.connected = g.value("connected", c.gen.connected);
    c.gen.train_frac = g.value("train_frac", c.gen.train_frac);
    c.gen.val_frac = g.value("val_frac", c.gen.val_frac);
    c.gen.test_frac = g.value("test_frac", c.gen.test_frac);
  }
  if (j.contains("ground_truth")) {
    const auto& g = j.at("ground_truth");
    check_keys(g, {"exact_max_nodes", "beam_width", "astar_budget"}, "ground_truth");
    c.policy.exact_max_nodes = g.value("exact_max_nodes", c.policy.exact_max_nodes);
    c.policy.beam_width = g.value("beam_width", c.policy.beam_width);
    c.policy.astar_budget = g.value("astar_budget", c.policy.astar_budget);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, {"gcn_dims", "input_dim", "pad_to", "resize_to", "cnn_spec", "dense_dims"},
               "model");
    if (m.contains("gcn_dims")) c.model.gcn_dims = m.at("gcn_dims").get<std::vector<int>>();
    c.model.input_dim = m.value("input_dim", c.model.input_dim);
    c.model.pad_to = m.value("pad_to", c.model.pad_to);
    c.model.resize_to = m.value("resize_to", c.model.resize_to);
    c.model.cnn_spec = m.value("cnn_spec", c.model.cnn_spec);
    if (m.contains("dense_dims")) c.model.dense_dims = m.at("dense_dims").get<std::vector<int>>();
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    check_keys(t,
               {"iterations", "batch_size", "validation_interval", "validation_subsample", "lr"},
               "training");
    c.train.iterations = t.value("iterations", c.train.iterations);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.validation_interval = t.value("validation_interval", c.train.validation_interval);
    c.train.validation_subsample = t.value("validation_subsample", c.train.validation_subsample);
    c.train.lr = t.value("lr", c.train.lr);
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  return parse_run_config(j);
}

// Every omitted field resolved to its default, keys sorted by the dump, so
// equivalent config files hash identically.
std::string canonical_config(const RunConfig& c) {
  nlohmann::json j;
  j["generator"] = {{"count", c.gen.count},
                    {"min_nodes", c.gen.min_nodes},
                    {"max_nodes", c.gen.max_nodes},
                    {"edge_prob", c.gen.edge_prob},
                    {"labels", c.gen.labels},
                    {"connected", c.gen.connected},
                    {"train_frac", c.gen.train_frac},
                    {"val_frac", c.gen.val_frac},
                    {"test_frac", c.gen.test_frac}};
  j["ground_truth"] = {{"exact_max_nodes", c.policy.exact_max_nodes},
                       {"beam_width", c.policy.beam_width},
                       {"astar_budget", c.policy.astar_budget}};
  j["model"] = {{"gcn_dims", c.model.gcn_dims},   {"input_dim", c.model.input_dim},
                {"pad_to", c.model.pad_to},       {"resize_to", c.model.resize_to},
                {"cnn_spec", c.model.cnn_spec},   {"dense_dims", c.model.dense_dims}};
  j["training"] = {{"iterations", c.train.iterations},
                   {"batch_size", c.train.batch_size},
                   {"validation_interval", c.train.validation_interval},
                   {"validation_subsample", c.train.validation_subsample},
                   {"lr", c.train.lr}};
  return j.dump();
}

std::string out_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing file: " + path);
}

std::string method_slug(const std::string& method) {
  std::string s = method;
  for (char& c : s) c = c == ':' ? '_' : c;
  return s;
}

Dataset load_checked_dataset(const std::string& dir, std::uint64_t seed,
                             const std::string& hash) {
  Dataset ds = load_dataset(out_path(dir, "dataset.json"));
  if (ds.seed != seed || ds.config_hash != hash)
    throw std::runtime_error(
        "dataset.json was produced with a different seed or config; rerun gen");
  return ds;
}

PairFile load_checked_pairs(const std::string& dir, std::uint64_t seed, const std::string& hash,
                            const GroundTruthPolicy& policy) {
  PairFile pf = load_pairs(out_path(dir, "pairs.json"));
  if (pf.seed != seed || pf.config_hash != pair_config_hash(hash, policy))
    throw std::runtime_error(
        "pairs.json was produced with a different seed or config; rerun groundtruth");
  return pf;
}

ModelKind parse_kind(const std::string& name) {
  if (name == "gsimcnn") return ModelKind::kGsimcnn;
  if (name == "embavg") return ModelKind::kEmbAvg;
  throw std::invalid_argument("unknown model: " + name + " (expected gsimcnn or embavg)");
}

void cmd_gen(std::uint64_t seed, const RunConfig& cfg, const std::string& hash,
             const std::string& out) {
  std::filesystem::create_directories(out);
  Dataset ds = generate_dataset(cfg.gen, seed, hash);
  save_dataset(out_path(out, "dataset.json"), ds);
  std::printf("wrote %s: %d graphs, split %zu/%zu/%zu, seed %llu, config %s\n",
              out_path(out, "dataset.json").c_str(), static_cast<int>(ds.graphs.size()),
              ds.train_ids.size(), ds.val_ids.size(), ds.test_ids.size(),
              static_cast<unsigned long long>(seed), hash.c_str());
}

void cmd_groundtruth(std::uint64_t seed, const RunConfig& cfg, const std::string& hash,
                     const std::string& out, int threads) {
  Dataset ds = load_checked_dataset(out, seed, hash);
  GroundTruthPolicy policy = cfg.policy;
  policy.threads = threads;
  PairFile pf = compute_ground_truth(ds, policy);
  save_pairs(out_path(out, "pairs.json"), pf);
  int exact = 0;
  for (const LabeledPair& p : pf.pairs)
    if (p.kind == GroundTruthKind::kExact) ++exact;
  if (pf.fallbacks > 0)
    std::fprintf(stderr, "warning: %d pairs exhausted the search budget and fell back to bounds\n",
                 pf.fallbacks);
  std::printf("wrote %s: %zu pairs (%d exact, %zu bounded)\n",
              out_path(out, "pairs.json").c_str(), pf.pairs.size(), exact,
              pf.pairs.size() - exact);
}

void cmd_train(std::uint64_t seed, const RunConfig& cfg, const std::string& hash,
               const std::string& out, const std::string& model_name) {
  ModelKind kind = parse_kind(model_name);
  Dataset ds = load_checked_dataset(out, seed, hash);
  PairFile pf = load_checked_pairs(out, seed, hash, cfg.policy);

  ModelConfig mc = cfg.model;
  mc.input_dim = std::max(mc.input_dim, ds.label_width());
  std::vector<TrainingPair> train = training_pairs(ds, pf, PairRole::kTrain);
  std::vector<TrainingPair> val = training_pairs(ds, pf, PairRole::kVal);
  TrainResult r = train_model(ds.graphs, train, val, mc, kind, seed, cfg.train);

  std::string ckpt_path = out_path(out, "checkpoint_" + model_name + ".bin");
  save_checkpoint(ckpt_path, r.best);

  std::string trace = "iteration,train_loss,val_loss\n";
  char row[96];
  for (const TraceRow& t : r.trace) {
    std::snprintf(row, sizeof row, "%d,", t.iteration);
    trace += row;
    if (!std::isnan(t.train_loss)) {
      std::snprintf(row, sizeof row, "%.17g", t.train_loss);
      trace += row;
    }
    trace += ',';
    if (!std::isnan(t.val_loss)) {
      std::snprintf(row, sizeof row, "%.17g", t.val_loss);
      trace += row;
    }
    trace += '\n';
  }
  write_text(out_path(out, "train_trace_" + model_name + ".csv"), trace);

  std::printf("wrote %s: best validation loss %.6g at iteration %lld (%zu train pairs)\n",
              ckpt_path.c_str(), r.best.best_val_loss,
              static_cast<long long>(r.best.iteration), train.size());
}

void cmd_eval(std::uint64_t seed, const RunConfig& cfg, const std::string& hash,
              const std::string& out, std::vector<std::string> methods,
              const std::string& ckpt_gsimcnn, const std::string& ckpt_embavg, int threads) {
  Dataset ds = load_checked_dataset(out, seed, hash);
  PairFile pf = load_checked_pairs(out, seed, hash, cfg.policy);

  Checkpoint gs, ea;
  bool have_gs = !ckpt_gsimcnn.empty(), have_ea = !ckpt_embavg.empty();
  if (have_gs) gs = load_checkpoint(ckpt_gsimcnn);
  if (have_ea) ea = load_checkpoint(ckpt_embavg);

  if (methods.empty()) {
    methods = {"hungarian", "vj", "hed", "beam:100"};
    if (have_gs) methods.push_back("gsimcnn");
    if (have_ea) methods.push_back("embavg");
  }

  for (const std::string& m : methods) {
    const Checkpoint* ckpt = nullptr;
    if (m == "gsimcnn") {
      if (!have_gs) throw std::invalid_argument("method gsimcnn needs --checkpoint");
      ckpt = &gs;
    } else if (m == "embavg") {
      if (!have_ea) throw std::invalid_argument("method embavg needs --checkpoint-embavg");
      ckpt = &ea;
    }
    EvalResult r = evaluate_method(ds, pf, m, ckpt, threads);
    std::string slug = method_slug(m);
    write_text(out_path(out, "report_" + slug + ".json"), eval_result_to_json(r, seed, hash));
    write_text(out_path(out, "report_" + slug + ".csv"), eval_result_to_csv(r, seed, hash));
    std::printf("%-12s mse %.6f  rho %.4f  tau %.4f  p@10 %.4f  p@20 %.4f\n", m.c_str(),
                r.report.mse, r.report.mean_rho, r.report.mean_tau, r.report.p_at_10,
                r.report.p_at_20);
  }
}

void cmd_bench(std::uint64_t seed, const RunConfig&, const std::string& hash,
               const std::string& out, int pairs_per_size, const std::string& ckpt_path) {
  Dataset ds = load_checked_dataset(out, seed, hash);
  Checkpoint ckpt;
  bool have_ckpt = !ckpt_path.empty();
  if (have_ckpt) ckpt = load_checkpoint(ckpt_path);
  BenchReport b = run_bench(ds, pairs_per_size, seed, hash, have_ckpt ? &ckpt : nullptr);
  write_text(out_path(out, "bench.json"), bench_to_json(b));
  std::fputs(bench_table(b).c_str(), stdout);
}

void cmd_rank(std::uint64_t seed, const RunConfig&, const std::string& hash,
              const std::string& out, const std::string& query_path, int query_id, int k,
              const std::string& ckpt_path) {
  Dataset ds = load_checked_dataset(out, seed, hash);
  if (ckpt_path.empty()) throw std::invalid_argument("rank needs --checkpoint");
  Checkpoint ckpt = load_checkpoint(ckpt_path);

  PairFile pf;
  bool have_pairs = std::filesystem::exists(out_path(out, "pairs.json"));
  if (have_pairs) pf = load_pairs(out_path(out, "pairs.json"));

  LabeledGraph query({0}, {});
  if (query_id >= 0) {
    if (query_id >= static_cast<int>(ds.graphs.size()))
      throw std::invalid_argument("query id outside the dataset");
    query = ds.graphs[query_id];
  } else if (!query_path.empty()) {
    std::ifstream in(query_path);
    if (!in) throw std::runtime_error("cannot open query graph: " + query_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    query = parse_graph(text);
  } else {
    throw std::invalid_argument("rank needs --query-id or --query");
  }

  auto top = rank_query(ds, query, ckpt, k, have_pairs ? &pf : nullptr, query_id);

  nlohmann::json j;
  j["seed"] = seed;
  j["config_hash"] = hash;
  if (query_id >= 0)
    j["query_id"] = query_id;
  else
    j["query_id"] = nullptr;
  j["k"] = k;
  nlohmann::json entries = nlohmann::json::array();
  std::printf("rank  candidate  score     true_nged\n");
  for (std::size_t r = 0; r < top.size(); ++r) {
    nlohmann::json e{{"candidate_id", top[r].candidate_id}, {"predicted", top[r].predicted}};
    if (top[r].true_nged >= 0.0) {
      e["true_nged"] = top[r].true_nged;
      std::printf("%4zu  %9d  %.6f  %.6f\n", r + 1, top[r].candidate_id, top[r].predicted,
                  top[r].true_nged);
    } else {
      e["true_nged"] = nullptr;
      std::printf("%4zu  %9d  %.6f  -\n", r + 1, top[r].candidate_id, top[r].predicted);
    }
    entries.push_back(std::move(e));
  }
  j["entries"] = std::move(entries);
  write_text(out_path(out, "rank.json"), j.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph edit distance toolkit: synthetic corpora, ground truth, learned scoring"};
  app.require_subcommand(1);

  std::uint64_t seed = 7;
  std::string config_path, out_dir = ".";
  app.add_option("--seed", seed, "run seed, embedded in every artifact")->capture_default_str();
  app.add_option("--config", config_path, "JSON config file; omitted fields use defaults");
  app.add_option("--out", out_dir, "artifact directory")->capture_default_str();

  CLI::App* gen = app.add_subcommand("gen", "generate a labeled graph dataset with splits");
  CLI::App* gt = app.add_subcommand("groundtruth", "compute distances for every pair role");
  int gt_threads = 1;
  gt->add_option("--threads", gt_threads, "worker threads")->capture_default_str();

  CLI::App* train = app.add_subcommand("train", "fit a model on the train pairs");
  std::string train_model_name = "gsimcnn";
  train->add_option("--model", train_model_name, "gsimcnn or embavg")->capture_default_str();

  CLI::App* eval = app.add_subcommand("eval", "rank candidates for test queries and score them");
  std::vector<std::string> eval_methods;
  std::string eval_ckpt, eval_ckpt_embavg;
  int eval_threads = 1;
  eval->add_option("--methods", eval_methods,
                   "methods to score (default: hungarian vj hed beam:100 plus any checkpoints)");
  eval->add_option("--checkpoint", eval_ckpt, "gsimcnn checkpoint path");
  eval->add_option("--checkpoint-embavg", eval_ckpt_embavg, "embavg checkpoint path");
  eval->add_option("--threads", eval_threads, "worker threads")->capture_default_str();

  CLI::App* bench = app.add_subcommand("bench", "time every method across pair sizes");
  int bench_pairs = 10;
  std::string bench_ckpt;
  bench->add_option("--pairs-per-size", bench_pairs, "sampled pairs per size bucket")
      ->capture_default_str();
  bench->add_option("--checkpoint", bench_ckpt, "optional model checkpoint to include");

  CLI::App* rank = app.add_subcommand("rank", "top candidates for one query graph");
  std::string rank_query_path, rank_ckpt;
  int rank_query_id = -1, rank_k = 10;
  rank->add_option("--query", rank_query_path, "query graph JSON file");
  rank->add_option("--query-id", rank_query_id, "use a dataset graph as the query");
  rank->add_option("--k", rank_k, "list length")->capture_default_str();
  rank->add_option("--checkpoint", rank_ckpt, "model checkpoint path");

  std::string command;
  try {
    app.parse(argc, argv);
    command = app.get_subcommands().front()->get_name();
    RunConfig cfg = load_run_config(config_path);
    std::string hash = config_hash_hex(canonical_config(cfg));
    if (gen->parsed()) cmd_gen(seed, cfg, hash, out_dir);
    if (gt->parsed()) cmd_groundtruth(seed, cfg, hash, out_dir, gt_threads);
    if (train->parsed()) cmd_train(seed, cfg, hash, out_dir, train_model_name);
    if (eval->parsed())
      cmd_eval(seed, cfg, hash, out_dir, eval_methods, eval_ckpt, eval_ckpt_embavg, eval_threads);
    if (bench->parsed()) cmd_bench(seed, cfg, hash, out_dir, bench_pairs, bench_ckpt);
    if (rank->parsed())
      cmd_rank(seed, cfg, hash, out_dir, rank_query_path, rank_query_id, rank_k, rank_ckpt);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    nlohmann::json record{{"error", e.what()}, {"command", "parse"}};
    std::fprintf(stderr, "%s\n", record.dump().c_str());
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  } catch (const std::exception& e) {
    nlohmann::json record{{"error", e.what()}, {"command", command}};
    std::fprintf(stderr, "%s\n", record.dump().c_str());
    return 1;
  }
}
