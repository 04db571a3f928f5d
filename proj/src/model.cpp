#include "gedforge/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

namespace gedforge {

const char kDefaultCnnSpec[] =
    "conv(6,1,1,16),maxpool(2),conv(6,1,16,32),maxpool(2),conv(5,1,32,64),maxpool(2),"
    "conv(5,1,64,128),maxpool(3),conv(5,1,128,128),maxpool(3)";

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

ad::AggregateCoeffs gcn_coeffs(const LabeledGraph& g) {
  const int n = g.node_count();
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[i] = g.degree(i) + 1.0;  // self loop counted
  ad::AggregateCoeffs coeffs(n);
  for (int i = 0; i < n; ++i) {
    coeffs[i].push_back({i, 1.0 / d[i]});
    for (int j : g.neighbors(i)) coeffs[i].push_back({j, 1.0 / std::sqrt(d[i] * d[j])});
  }
  return coeffs;
}

ad::Tensor one_hot_features(const LabeledGraph& g, int input_dim) {
  const int n = g.node_count();
  ad::Tensor x({n, input_dim});
  for (int i = 0; i < n; ++i) {
    require(g.label(i) < input_dim, "node label outside the feature range");
    x[static_cast<std::int64_t>(i) * input_dim + g.label(i)] = 1.0;
  }
  return x;
}

}  // namespace

std::vector<CnnOp> parse_cnn_spec(const std::string& spec) {
  std::vector<CnnOp> ops;
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < spec.size() && std::isspace(static_cast<unsigned char>(spec[pos]))) ++pos;
  };
  skip_space();
  while (pos < spec.size()) {
    std::size_t start = pos;
    while (pos < spec.size() && (std::isalpha(static_cast<unsigned char>(spec[pos])))) ++pos;
    std::string name = spec.substr(start, pos - start);
    require(pos < spec.size() && spec[pos] == '(', "malformed cnn spec: expected '('");
    ++pos;
    std::vector<int> args;
    while (true) {
      skip_space();
      std::size_t num_start = pos;
      while (pos < spec.size() && std::isdigit(static_cast<unsigned char>(spec[pos]))) ++pos;
      require(pos > num_start, "malformed cnn spec: expected an integer");
      args.push_back(std::stoi(spec.substr(num_start, pos - num_start)));
      skip_space();
      require(pos < spec.size(), "malformed cnn spec: unterminated record");
      if (spec[pos] == ',') {
        ++pos;
        continue;
      }
      require(spec[pos] == ')', "malformed cnn spec: expected ')'");
      ++pos;
      break;
    }
    CnnOp op;
    if (name == "conv") {
      require(args.size() == 4, "malformed cnn spec: conv takes 4 arguments");
      require(args[1] == 1, "only stride 1 convolutions are supported");
      require(args[0] >= 1 && args[2] >= 1 && args[3] >= 1, "conv arguments must be positive");
      op.window = args[0];
      op.in_channels = args[2];
      op.out_channels = args[3];
    } else if (name == "maxpool") {
      require(args.size() == 1, "malformed cnn spec: maxpool takes 1 argument");
      require(args[0] >= 1, "maxpool size must be positive");
      op.is_pool = true;
      op.pool_size = args[0];
    } else {
      require(false, "malformed cnn spec: unknown record '" + name + "'");
    }
    ops.push_back(op);
    skip_space();
    if (pos < spec.size()) {
      require(spec[pos] == ',', "malformed cnn spec: expected ',' between records");
      ++pos;
      skip_space();
    }
  }
  require(!ops.empty(), "cnn spec is empty");
  return ops;
}

void validate_config(const ModelConfig& config) {
  require(!config.gcn_dims.empty(), "need at least one graph convolution layer");
  for (int d : config.gcn_dims) require(d >= 1, "gcn layer widths must be positive");
  require(config.input_dim >= 1, "input_dim must be positive");
  require(config.pad_to >= 1, "pad_to must be positive");
  require(config.resize_to >= 1, "resize_to must be positive");
  require(config.dense_dims.size() >= 2, "dense head needs at least input and output widths");
  for (int d : config.dense_dims) require(d >= 1, "dense widths must be positive");
  require(config.dense_dims.back() == 1, "dense head must end at a single score");

  std::vector<CnnOp> ops = parse_cnn_spec(config.cnn_spec);
  int channels = 1;
  int side = config.resize_to;
  for (const CnnOp& op : ops) {
    if (op.is_pool) {
      side = (side + op.pool_size - 1) / op.pool_size;
    } else {
      require(op.in_channels == channels, "conv input channels do not chain");
      channels = op.out_channels;
    }
  }
  require(side == 1, "cnn stack must collapse the similarity map to a 1x1 cell");
  require(channels == config.dense_dims.front(),
          "dense head width must match the final channel count");
}

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  validate_config(config);
  ModelParams p;
  int din = config.input_dim;
  for (int dout : config.gcn_dims) {
    p.gcn_w.push_back(ad::glorot({din, dout}, rng));
    p.gcn_b.push_back(ad::Tensor({dout}, 0.0));
    din = dout;
  }
  for (const CnnOp& op : parse_cnn_spec(config.cnn_spec)) {
    if (op.is_pool) continue;
    p.conv_w.push_back(ad::glorot({op.out_channels, op.in_channels, op.window, op.window}, rng));
    p.conv_b.push_back(ad::Tensor({op.out_channels}, 0.0));
  }
  for (std::size_t k = 0; k + 1 < config.dense_dims.size(); ++k) {
    p.dense_w.push_back(ad::glorot({config.dense_dims[k], config.dense_dims[k + 1]}, rng));
    p.dense_b.push_back(ad::Tensor({config.dense_dims[k + 1]}, 0.0));
  }
  return p;
}

std::vector<ad::Tensor*> ModelParams::flat() {
  std::vector<ad::Tensor*> out;
  for (auto list : {&gcn_w, &gcn_b, &conv_w, &conv_b, &dense_w, &dense_b})
    for (auto& t : *list) out.push_back(&t);
  return out;
}

std::vector<const ad::Tensor*> ModelParams::flat() const {
  std::vector<const ad::Tensor*> out;
  for (auto list : {&gcn_w, &gcn_b, &conv_w, &conv_b, &dense_w, &dense_b})
    for (const auto& t : *list) out.push_back(&t);
  return out;
}

TapeParams stage_params(ad::Graph& tape, const ModelParams& params, bool trainable) {
  TapeParams tp;
  auto stage = [&](const std::vector<ad::Tensor>& src, std::vector<ad::NodeId>& dst) {
    for (const ad::Tensor& t : src) {
      ad::NodeId id = tape.input(t, trainable);
      dst.push_back(id);
      tp.flat.push_back(id);
    }
  };
  stage(params.gcn_w, tp.gcn_w);
  stage(params.gcn_b, tp.gcn_b);
  stage(params.conv_w, tp.conv_w);
  stage(params.conv_b, tp.conv_b);
  stage(params.dense_w, tp.dense_w);
  stage(params.dense_b, tp.dense_b);
  return tp;
}

ad::NodeId encode_nodes(ad::Graph& tape, const TapeParams& tp, const ModelConfig& config,
                        const LabeledGraph& g) {
  ad::AggregateCoeffs coeffs = gcn_coeffs(g);
  ad::NodeId x = tape.input(one_hot_features(g, config.input_dim), false);
  for (std::size_t k = 0; k < tp.gcn_w.size(); ++k) {
    ad::NodeId agg = tape.gcn_aggregate(x, coeffs);
    x = tape.relu(tape.add_bias(tape.matmul(agg, tp.gcn_w[k]), tp.gcn_b[k]));
  }
  return x;
}

ad::NodeId similarity_map(ad::Graph& tape, ad::NodeId h1, ad::NodeId h2, const NodeOrdering& o1,
                          const NodeOrdering& o2, int pad_to, int resize_to) {
  ad::NodeId p1 = tape.gather_rows_pad(h1, o1, pad_to);
  ad::NodeId p2 = tape.gather_rows_pad(h2, o2, pad_to);
  ad::NodeId gram = tape.matmul_nt(p1, p2);
  ad::NodeId img = tape.reshape(gram, {1, 1, pad_to, pad_to});
  return tape.resize_bilinear(img, resize_to, resize_to);
}

ad::NodeId pair_score(ad::Graph& tape, const TapeParams& tp, const ModelConfig& config,
                      ModelKind kind, const LabeledGraph& a, const LabeledGraph& b) {
  ad::NodeId h1 = encode_nodes(tape, tp, config, a);
  ad::NodeId h2 = encode_nodes(tape, tp, config, b);
  if (kind == ModelKind::kEmbAvg) return tape.sigmoid(tape.dot(tape.mean_rows(h1), tape.mean_rows(h2)));

  require(a.node_count() <= config.pad_to && b.node_count() <= config.pad_to,
          "graph exceeds pad_to");
  ad::NodeId x = similarity_map(tape, h1, h2, bfs_order(a), bfs_order(b), config.pad_to,
                                config.resize_to);
  std::size_t conv_index = 0;
  for (const CnnOp& op : parse_cnn_spec(config.cnn_spec)) {
    if (op.is_pool) {
      x = tape.maxpool2d(x, op.pool_size);
    } else {
      x = tape.relu(tape.conv2d(x, tp.conv_w[conv_index], tp.conv_b[conv_index], op.window));
      ++conv_index;
    }
  }
  x = tape.reshape(x, {1, config.dense_dims.front()});
  for (std::size_t k = 0; k < tp.dense_w.size(); ++k) {
    x = tape.add_bias(tape.matmul(x, tp.dense_w[k]), tp.dense_b[k]);
    if (k + 1 < tp.dense_w.size()) x = tape.relu(x);
  }
  return tape.sigmoid(x);
}

ad::Tensor gcn_encode(const LabeledGraph& g, const ModelParams& params, const ModelConfig& config) {
  ad::Graph tape;
  TapeParams tp = stage_params(tape, params, false);
  return tape.value(encode_nodes(tape, tp, config, g));
}

double model_forward(const LabeledGraph& a, const LabeledGraph& b, const Checkpoint& ckpt) {
  ad::Graph tape;
  TapeParams tp = stage_params(tape, ckpt.params, false);
  return tape.value(pair_score(tape, tp, ckpt.config, ckpt.kind, a, b))[0];
}

namespace {

void check_pairs(const std::vector<LabeledGraph>& graphs, const std::vector<TrainingPair>& pairs,
                 const char* which) {
  require(!pairs.empty(), std::string(which) + " pair list is empty");
  const int n = static_cast<int>(graphs.size());
  for (const TrainingPair& p : pairs) {
    require(p.i >= 0 && p.i < n && p.j >= 0 && p.j < n, "pair index out of range");
    require(p.target > 0.0 && p.target <= 1.0, "pair target outside (0,1]");
  }
}

double eval_mse(const std::vector<LabeledGraph>& graphs, const std::vector<TrainingPair>& pairs,
                const ModelParams& params, const ModelConfig& config, ModelKind kind) {
  constexpr std::size_t kChunk = 128;
  double sq = 0.0;
  for (std::size_t at = 0; at < pairs.size(); at += kChunk) {
    ad::Graph tape;
    TapeParams tp = stage_params(tape, params, false);
    std::size_t end = std::min(pairs.size(), at + kChunk);
    for (std::size_t k = at; k < end; ++k) {
      double s =
          tape.value(pair_score(tape, tp, config, kind, graphs[pairs[k].i], graphs[pairs[k].j]))[0];
      double d = s - pairs[k].target;
      sq += d * d;
    }
  }
  return sq / static_cast<double>(pairs.size());
}

}  // namespace

double batch_loss(const std::vector<LabeledGraph>& graphs, const std::vector<TrainingPair>& pairs,
                  const Checkpoint& ckpt) {
  check_pairs(graphs, pairs, "loss");
  return eval_mse(graphs, pairs, ckpt.params, ckpt.config, ckpt.kind);
}

TrainResult train_model(const std::vector<LabeledGraph>& graphs,
                        const std::vector<TrainingPair>& train_pairs,
                        const std::vector<TrainingPair>& val_pairs, const ModelConfig& config,
                        ModelKind kind, std::uint64_t seed, const TrainOptions& opts) {
  validate_config(config);
  require(!graphs.empty(), "graph list is empty");
  check_pairs(graphs, train_pairs, "training");
  check_pairs(graphs, val_pairs, "validation");
  require(opts.iterations >= 0, "iteration count must be non-negative");
  require(opts.batch_size >= 1, "batch size must be positive");
  require(opts.validation_interval >= 1, "validation interval must be positive");

  Rng init_rng = Rng::substream(seed, "init");
  ModelParams params = ModelParams::init(config, init_rng);
  std::vector<ad::Tensor*> flat = params.flat();
  std::vector<ad::Tensor> flat_values;
  for (ad::Tensor* t : flat) flat_values.push_back(*t);
  ad::AdamState adam = ad::AdamState::init(flat_values);
  adam.lr = opts.lr;

  std::vector<TrainingPair> val_set = val_pairs;
  if (opts.validation_subsample > 0 &&
      static_cast<std::size_t>(opts.validation_subsample) < val_set.size()) {
    Rng sub_rng = Rng::substream(seed, "valsub");
    sub_rng.shuffle(val_set);
    val_set.resize(opts.validation_subsample);
  }

  TrainResult result;
  result.best.kind = kind;
  result.best.config = config;
  result.best.seed = seed;

  auto measure_and_keep = [&](int iteration) {
    double val = eval_mse(graphs, val_set, params, config, kind);
    if (val < result.best.best_val_loss) {
      result.best.params = params;
      result.best.adam = adam;
      result.best.iteration = iteration;
      result.best.best_val_loss = val;
    }
    return val;
  };

  result.trace.push_back({0, std::numeric_limits<double>::quiet_NaN(), measure_and_keep(0)});

  Rng batch_rng = Rng::substream(seed, "batch");
  for (int it = 1; it <= opts.iterations; ++it) {
    ad::Graph tape;
    TapeParams tp = stage_params(tape, params, true);
    std::vector<ad::NodeId> scores;
    ad::Tensor targets({opts.batch_size});
    for (int k = 0; k < opts.batch_size; ++k) {
      const TrainingPair& p =
          train_pairs[batch_rng.below(static_cast<std::uint64_t>(train_pairs.size()))];
      scores.push_back(pair_score(tape, tp, config, kind, graphs[p.i], graphs[p.j]));
      targets[k] = p.target;
    }
    ad::NodeId loss = tape.mse_loss(tape.stack_scalars(scores), targets);
    tape.backward(loss);

    std::vector<ad::Tensor> grads;
    grads.reserve(tp.flat.size());
    for (ad::NodeId id : tp.flat) grads.push_back(tape.grad(id));
    std::vector<ad::Tensor> values;
    values.reserve(flat.size());
    for (ad::Tensor* t : flat) values.push_back(std::move(*t));
    ad::adam_step(values, grads, adam);
    for (std::size_t p = 0; p < flat.size(); ++p) *flat[p] = std::move(values[p]);

    TraceRow row;
    row.iteration = it;
    row.train_loss = tape.value(loss)[0];
    if (it % opts.validation_interval == 0 || it == opts.iterations)
      row.val_loss = measure_and_keep(it);
    result.trace.push_back(row);
  }
  return result;
}

namespace {

struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw std::runtime_error("cannot open checkpoint file for writing: " + path);
  }
  void bytes(const void* p, std::size_t n) { out.write(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void i64(std::int64_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void ints(const std::vector<int>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (int x : v) i64(x);
  }
  void tensor(const ad::Tensor& t) {
    ints(t.shape);
    u64(static_cast<std::uint64_t>(t.numel()));
    for (double x : t.data) f64(x);
  }
  void tensors(const std::vector<ad::Tensor>& list) {
    u32(static_cast<std::uint32_t>(list.size()));
    for (const auto& t : list) tensor(t);
  }
};

struct Reader {
  std::ifstream in;
  explicit Reader(const std::string& path) : in(path, std::ios::binary) {
    if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  }
  void bytes(void* p, std::size_t n) {
    in.read(static_cast<char*>(p), n);
    if (in.gcount() != static_cast<std::streamsize>(n))
      throw std::runtime_error("corrupt checkpoint: truncated file");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::int64_t i64() {
    std::int64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string str() {
    std::string s(u32(), '\0');
    bytes(s.data(), s.size());
    return s;
  }
  std::vector<int> ints() {
    std::vector<int> v(u32());
    for (auto& x : v) x = static_cast<int>(i64());
    return v;
  }
  ad::Tensor tensor() {
    ad::Tensor t;
    t.shape = ints();
    std::uint64_t n = u64();
    if (n != static_cast<std::uint64_t>(ad::shape_numel(t.shape)))
      throw std::runtime_error("corrupt checkpoint: tensor size mismatch");
    t.data.resize(n);
    for (auto& x : t.data) x = f64();
    return t;
  }
  std::vector<ad::Tensor> tensors() {
    std::vector<ad::Tensor> list(u32());
    for (auto& t : list) t = tensor();
    return list;
  }
};

constexpr std::uint32_t kCheckpointMagic = 0x4b434647;  // "GFCK"
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  Writer w(path);
  w.u32(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(ckpt.kind == ModelKind::kGsimcnn ? 0 : 1);
  w.ints(ckpt.config.gcn_dims);
  w.i64(ckpt.config.input_dim);
  w.i64(ckpt.config.pad_to);
  w.i64(ckpt.config.resize_to);
  w.str(ckpt.config.cnn_spec);
  w.ints(ckpt.config.dense_dims);
  for (auto list : {&ckpt.params.gcn_w, &ckpt.params.gcn_b, &ckpt.params.conv_w,
                    &ckpt.params.conv_b, &ckpt.params.dense_w, &ckpt.params.dense_b})
    w.tensors(*list);
  w.tensors(ckpt.adam.m);
  w.tensors(ckpt.adam.v);
  w.i64(ckpt.adam.t);
  w.f64(ckpt.adam.lr);
  w.f64(ckpt.adam.beta1);
  w.f64(ckpt.adam.beta2);
  w.f64(ckpt.adam.eps);
  w.u64(ckpt.seed);
  w.i64(ckpt.iteration);
  w.f64(ckpt.best_val_loss);
  if (!w.out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  if (r.u32() != kCheckpointMagic) throw std::runtime_error("corrupt checkpoint: bad magic");
  if (r.u32() != kCheckpointVersion)
    throw std::runtime_error("corrupt checkpoint: unsupported version");
  Checkpoint ckpt;
  ckpt.kind = r.u32() == 0 ? ModelKind::kGsimcnn : ModelKind::kEmbAvg;
  ckpt.config.gcn_dims = r.ints();
  ckpt.config.input_dim = static_cast<int>(r.i64());
  ckpt.config.pad_to = static_cast<int>(r.i64());
  ckpt.config.resize_to = static_cast<int>(r.i64());
  ckpt.config.cnn_spec = r.str();
  ckpt.config.dense_dims = r.ints();
  for (auto list : {&ckpt.params.gcn_w, &ckpt.params.gcn_b, &ckpt.params.conv_w,
                    &ckpt.params.conv_b, &ckpt.params.dense_w, &ckpt.params.dense_b})
    *list = r.tensors();
  ckpt.adam.m = r.tensors();
  ckpt.adam.v = r.tensors();
  ckpt.adam.t = r.i64();
  ckpt.adam.lr = r.f64();
  ckpt.adam.beta1 = r.f64();
  ckpt.adam.beta2 = r.f64();
  ckpt.adam.eps = r.f64();
  ckpt.seed = r.u64();
  ckpt.iteration = r.i64();
  ckpt.best_val_loss = r.f64();
  validate_config(ckpt.config);
  return ckpt;
}

}  // namespace gedforge
