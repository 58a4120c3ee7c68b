#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mdt/tensor.hpp"

namespace mdt {

// A trainable tensor plus its gradient and optimizer moment buffers. Params
// live in model structs; graphs reference them and must not outlive them.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
  bool requires_grad = true;

  Param() = default;
  Param(std::string name, Tensor value)
      : name(std::move(name)),
        value(std::move(value)),
        grad(this->value.shape()),
        m(this->value.shape()),
        v(this->value.shape()) {}
  void zero_grad() { grad.zero(); }
};

// Reverse-mode tape. Every operation is a pure function of its input values;
// evaluation order is fixed, so results are reproducible bit for bit.
class Graph {
public:
  using Id = int;

  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  // Leaves.
  Id input(Tensor v);                // constant
  Id param(Param& p);                // trainable (respects p.requires_grad)
  Id frozen(const Param& p);         // parameter used as a constant

  const Tensor& val(Id id) const { return node_value(id); }
  const Tensor& grad_of(Id id) const { return nodes_[static_cast<size_t>(id)].g; }

  // Seeds d(root)=1 and accumulates gradients into every param leaf's
  // Param::grad. root must be a single-element tensor.
  void backward(Id root);

  // Operations. All return a new node.
  // x: (C,H,W), w: (Cout,Cin,k,k), bias: (Cout) or -1 for none.
  Id conv2d(Id x, Id w, Id bias, int stride, int pad);
  // x: (C,H,W), w: (Cin,Cout,k,k), bias: (Cout) or -1.
  Id conv_transpose2d(Id x, Id w, Id bias, int stride, int pad);
  Id instance_norm(Id x, double eps = 1e-5);
  Id leaky_relu(Id x, double slope);
  Id tanh_op(Id x);
  Id sigmoid_op(Id x);
  Id add(Id a, Id b);
  Id concat_channels(Id a, Id b);
  Id channel_mean(Id x);  // (C,H,W) -> (C)
  Id global_mean(Id x);   // any shape -> {1}
  // x: (D), w: (O,D), bias: (O) or -1.
  Id linear(Id x, Id w, Id bias);
  // mean over elements of -[t*log(p) + (1-t)*log(1-p)], p clamped to
  // [eps, 1-eps]. Clamped elements get zero gradient.
  Id bce_mean(Id x, double target, double eps = 1e-7);
  Id l1_mean(Id a, Id b);
  Id softmax_cross_entropy(Id logits, int label);
  // sum_k coeff_k * term_k over single-element nodes -> {1}.
  Id weighted_sum(const std::vector<std::pair<Id, double>>& terms);

private:
  struct Node {
    Tensor own;                      // interior value storage
    const Tensor* ext = nullptr;     // external value (param leaves)
    Tensor g;
    Param* bound = nullptr;
    std::function<void(Graph&)> back;
  };

  const Tensor& node_value(Id id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    return n.ext ? *n.ext : n.own;
  }
  Tensor& grad_buf(Id id) { return nodes_[static_cast<size_t>(id)].g; }
  Id emplace(Tensor value);

  std::vector<Node> nodes_;
  bool recording_;
};

}  // namespace mdt
