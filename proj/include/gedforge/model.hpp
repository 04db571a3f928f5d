#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gedforge/graph.hpp"
#include "gedforge/rng.hpp"
#include "gedforge/tensor.hpp"

namespace gedforge {

enum class ModelKind { kGsimcnn, kEmbAvg };

// One stage of the image head: either a same-padded square convolution
// followed by relu, or a ceil-mode max pool.
struct CnnOp {
  bool is_pool = false;
  int window = 0;  // conv tap size
  int in_channels = 0;
  int out_channels = 0;
  int pool_size = 0;
};

extern const char kDefaultCnnSpec[];

struct ModelConfig {
  std::vector<int> gcn_dims{64, 64, 32};
  int input_dim = 1;  // one-hot label width; 1 degenerates to a constant feature
  int pad_to = 10;
  int resize_to = 10;
  std::string cnn_spec = kDefaultCnnSpec;
  std::vector<int> dense_dims{128, 64, 32, 1};
};

// "conv(window,stride,cin,cout)" and "maxpool(size)" records separated by
// commas. Only stride 1 is supported. Malformed records throw.
std::vector<CnnOp> parse_cnn_spec(const std::string& spec);

// Rejects configs whose conv stack does not collapse a resize_to square
// map to 1x1, whose channels do not chain, or whose dense head does not
// start at the final channel count and end at width 1.
void validate_config(const ModelConfig& config);

struct ModelParams {
  std::vector<ad::Tensor> gcn_w, gcn_b;
  std::vector<ad::Tensor> conv_w, conv_b;
  std::vector<ad::Tensor> dense_w, dense_b;

  // Glorot weights, zero biases, drawn in a fixed declaration order.
  static ModelParams init(const ModelConfig& config, Rng& rng);
  std::vector<ad::Tensor*> flat();
  std::vector<const ad::Tensor*> flat() const;
};

struct Checkpoint {
  ModelKind kind = ModelKind::kGsimcnn;
  ModelConfig config;
  ModelParams params;
  ad::AdamState adam;
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

// Binary format with raw double bits; a reloaded checkpoint reproduces
// forward outputs exactly.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Parameter tensors registered on a tape, in ModelParams order.
struct TapeParams {
  std::vector<ad::NodeId> gcn_w, gcn_b;
  std::vector<ad::NodeId> conv_w, conv_b;
  std::vector<ad::NodeId> dense_w, dense_b;
  std::vector<ad::NodeId> flat;
};

TapeParams stage_params(ad::Graph& tape, const ModelParams& params, bool trainable);

// Stacked graph convolutions over one-hot label features, rows in the
// graph's own node order. Throws when a label is out of the feature range.
ad::NodeId encode_nodes(ad::Graph& tape, const TapeParams& tp, const ModelConfig& config,
                        const LabeledGraph& g);

// Node-pair inner products with both sides reordered, zero-padded to
// pad_to, then bilinearly resized; shape {1,1,resize_to,resize_to}.
ad::NodeId similarity_map(ad::Graph& tape, ad::NodeId h1, ad::NodeId h2, const NodeOrdering& o1,
                          const NodeOrdering& o2, int pad_to, int resize_to);

// Scalar similarity score in (0,1) for one graph pair under either model.
ad::NodeId pair_score(ad::Graph& tape, const TapeParams& tp, const ModelConfig& config,
                      ModelKind kind, const LabeledGraph& a, const LabeledGraph& b);

// Convenience evaluation wrappers.
ad::Tensor gcn_encode(const LabeledGraph& g, const ModelParams& params, const ModelConfig& config);
double model_forward(const LabeledGraph& a, const LabeledGraph& b, const Checkpoint& ckpt);

struct TrainingPair {
  int i = 0;
  int j = 0;
  double target = 0.0;  // similarity in (0,1]
};

// Mean squared error of the scores against the pair targets.
double batch_loss(const std::vector<LabeledGraph>& graphs, const std::vector<TrainingPair>& pairs,
                  const Checkpoint& ckpt);

struct TrainOptions {
  int iterations = 2000;
  int batch_size = 32;
  int validation_interval = 100;
  // Cap on validation pairs per measurement; 0 means use all of them. The
  // subsample is drawn once per run from the seed, not per measurement.
  int validation_subsample = 1000;
  double lr = 0.001;
};

struct TraceRow {
  int iteration = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();  // NaN between measurements
};

struct TrainResult {
  Checkpoint best;
  std::vector<TraceRow> trace;
};

// Adam over uniformly resampled batches; returns the checkpoint with the
// lowest measured validation loss. Deterministic for a fixed seed.
TrainResult train_model(const std::vector<LabeledGraph>& graphs,
                        const std::vector<TrainingPair>& train_pairs,
                        const std::vector<TrainingPair>& val_pairs, const ModelConfig& config,
                        ModelKind kind, std::uint64_t seed, const TrainOptions& opts);

}  // namespace gedforge
