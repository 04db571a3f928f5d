#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "gedforge/rng.hpp"

namespace gedforge::ad {

// Dense row-major tensor of 64-bit floats. Rank 0 is a scalar (one element).
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0);
  static Tensor scalar(double v);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int dim(int axis) const { return shape[axis]; }
  int rank() const { return static_cast<int>(shape.size()); }

  double& operator[](std::int64_t i) { return data[i]; }
  double operator[](std::int64_t i) const { return data[i]; }
};

std::int64_t shape_numel(const std::vector<int>& shape);

// Glorot-uniform fill. Fan-in/out are read off the shape: [din,dout] for
// matrices, [cout,cin,k,k] for convolution filters.
Tensor glorot(const std::vector<int>& shape, Rng& rng);

using NodeId = int;

// Per-node weighted neighbor lists of a graph convolution, including the
// self loop: entry (j, w) of row i contributes w * x[j] to output row i.
using AggregateCoeffs = std::vector<std::vector<std::pair<int, double>>>;

// Reverse-mode tape. Every op evaluates eagerly and records a closure; a
// backward() pass replays the closures in reverse creation order with
// additive gradient fan-out. One tape per forward pass, single-threaded.
class Graph {
 public:
  NodeId input(Tensor value, bool needs_grad);

  // [m,k] x [k,n] -> [m,n]
  NodeId matmul(NodeId a, NodeId b);
  // [m,k] x [n,k]^T -> [m,n]
  NodeId matmul_nt(NodeId a, NodeId b);
  // Rows mix per the fixed coefficient lists; per-cell terms are summed in
  // sorted value order, making the result independent of node numbering.
  NodeId gcn_aggregate(NodeId x, const AggregateCoeffs& coeffs);
  NodeId add(NodeId a, NodeId b);
  // [n,d] + [d], broadcast over rows
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  // [b,cin,h,w] * [cout,cin,k,k] + [cout] -> [b,cout,h,w]; stride 1, zero
  // same-padding (even windows pad one more at the far edge)
  NodeId conv2d(NodeId x, NodeId w, NodeId bias, int window);
  // ceil-mode window pooling; ties pick the lowest flat index
  NodeId maxpool2d(NodeId x, int size);
  // align-corners bilinear; exact identity when the size is unchanged
  NodeId resize_bilinear(NodeId x, int out_h, int out_w);
  NodeId reshape(NodeId x, std::vector<int> shape);
  // [n,d] -> [pad_to,d] with row r = x[order[r]], zeros past the real rows
  NodeId gather_rows_pad(NodeId x, std::vector<int> order, int pad_to);
  // [n,d] -> [1,d]
  NodeId mean_rows(NodeId x);
  // [1,d] . [1,d] -> scalar
  NodeId dot(NodeId a, NodeId b);
  // scalars -> [n]
  NodeId stack_scalars(const std::vector<NodeId>& parts);
  // mean squared error of [n] against a constant target [n] -> scalar
  NodeId mse_loss(NodeId pred, const Tensor& target);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& grad(NodeId id) const { return nodes_[id].grad; }

  // Populates grads of every needs_grad node reachable from `loss`.
  void backward(NodeId loss);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void(Graph&)> backprop;
  };

  NodeId emplace(Tensor value, bool needs_grad, std::function<void(Graph&)> backprop);
  Tensor& grad_slot(NodeId id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
};

// Bias-corrected Adam over a flat parameter list.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t t = 0;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(const std::vector<Tensor>& params);
};

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace gedforge::ad
