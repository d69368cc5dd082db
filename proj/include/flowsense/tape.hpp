#pragma once

#include <functional>
#include <vector>

#include "flowsense/tensor.hpp"

namespace flowsense::neural {

// Reverse-mode tape. Nodes are appended in evaluation order; backward walks
// them once in reverse, so parents always appear before children. A tape is
// single-threaded and single-use per forward/backward pair.
//
// Every op validates shapes up front and checks its output for non-finite
// values, so divergence surfaces as a NumericError naming the op.
class Tape {
 public:
  using NodeId = int32_t;

  // Leaf node. needs_grad marks trainable parameters; plain inputs
  // (features, targets) stay constant and receive no gradient storage.
  NodeId input(Tensor value, bool needs_grad = false);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId add_rowvec(NodeId m, NodeId v);
  NodeId mul_rowvec(NodeId m, NodeId v);
  NodeId scale(NodeId x, double alpha);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId relu(NodeId x);
  NodeId tanh(NodeId x);
  NodeId layer_norm(NodeId x);
  NodeId softmax(NodeId x);
  NodeId mean_rows(NodeId x);
  NodeId sum_all(NodeId x);
  NodeId mse(NodeId pred, NodeId target);
  NodeId gather_rows(NodeId x, std::vector<int> idx);
  NodeId scatter_sum_rows(NodeId x, std::vector<int> idx, int out_rows);
  NodeId segment_mean_rows(NodeId x, std::vector<int> seg, int nseg);
  // Block multi-head self-attention over sequences of length seq_len packed
  // as consecutive rows. q/k/v are [B*seq_len x dm]; dm must divide by heads.
  NodeId attention(NodeId q, NodeId k, NodeId v, int seq_len, int heads);
  // Elementwise op with caller-supplied forward/derivative, mainly for
  // fault-injection in gradient tests. df receives (x, y).
  NodeId custom_unary(NodeId x, std::function<double(double)> f,
                      std::function<double(double, double)> df);

  void backward(NodeId loss);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  // Valid after backward() for needs_grad nodes.
  const Tensor& grad(NodeId id) const;
  bool needs_grad(NodeId id) const { return nodes_[id].needs_grad; }
  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> backprop;
    bool needs_grad = false;
  };

  NodeId emit(Tensor value, bool needs_grad, std::function<void()> backprop,
              const char* op_name);
  // Gradient accumulation target, or nullptr when the node is constant.
  Tensor* grad_sink(NodeId id);

  std::vector<Node> nodes_;
};

}  // namespace flowsense::neural
