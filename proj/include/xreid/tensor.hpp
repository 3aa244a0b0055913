#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace xreid {

// Error taxonomy used across the library. The CLI maps these onto exit codes:
// usage/contract problems -> invalid_argument, numerical trouble -> NumericError,
// filesystem trouble -> IoError.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int e : s) {
    if (e <= 0) throw std::invalid_argument("shape extents must be positive");
    n *= e;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// One node of the computation graph. Value buffers are written exactly once
// (at construction); ops never mutate their inputs. Parent order is the
// construction order, which pins the gradient accumulation order.
template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a backward pass reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backprop;  // reads this->grad, accumulates into parents
};

// Cheap shared handle over a Node. Copying a Tensor aliases the node.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<T> data) {
    return make_leaf(std::move(shape), std::move(data), false);
  }

  static Tensor parameter(Shape shape, std::vector<T> data) {
    return make_leaf(std::move(shape), std::move(data), true);
  }

  static Tensor zeros(Shape shape) {
    const auto n = shape_numel(shape);
    return make_leaf(std::move(shape), std::vector<T>(static_cast<size_t>(n), T(0)), false);
  }

  static Tensor full(Shape shape, T v) {
    const auto n = shape_numel(shape);
    return make_leaf(std::move(shape), std::vector<T>(static_cast<size_t>(n), v), false);
  }

  // Generic op constructor: the backprop closure sees the finished node and
  // accumulates into parents that require grad.
  static Tensor make_op(Shape shape, std::vector<T> value, std::vector<Tensor> parents,
                        std::function<void(Node<T>&)> backprop) {
    if (static_cast<int64_t>(value.size()) != shape_numel(shape))
      throw std::invalid_argument("make_op: value size does not match shape " + shape_str(shape));
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool rg = false;
    node->parents.reserve(parents.size());
    for (auto& p : parents) {
      if (!p.node_) throw std::invalid_argument("make_op: empty parent tensor");
      rg = rg || p.node_->requires_grad;
      node->parents.push_back(p.node_);
    }
    node->requires_grad = rg;
    if (rg) node->backprop = std::move(backprop);
    Tensor out;
    out.node_ = std::move(node);
    return out;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return check().shape; }
  int64_t numel() const { return static_cast<int64_t>(check().value.size()); }
  bool requires_grad() const { return check().requires_grad; }

  const std::vector<T>& value() const { return check().value; }

  // Leaf-only mutation hook for the optimizer; graph nodes built from the old
  // value are unaffected because ops copy what they need.
  std::vector<T>& leaf_value() {
    auto& n = check();
    if (!n.parents.empty())
      throw std::logic_error("leaf_value: refusing in-place mutation of a non-leaf graph tensor");
    return n.value;
  }

  T scalar() const {
    const auto& n = check();
    if (n.value.size() != 1)
      throw std::invalid_argument("scalar: tensor has shape " + shape_str(n.shape));
    return n.value[0];
  }

  bool grad_defined() const { return !check().grad.empty(); }

  // Gradient of the last backward pass; params never reached report zeros.
  std::vector<T> grad_or_zeros() const {
    const auto& n = check();
    if (n.grad.empty()) return std::vector<T>(n.value.size(), T(0));
    return n.grad;
  }

  void clear_grad() { check().grad.clear(); }

  // Reverse-mode sweep from a scalar root. Reachable nodes get fresh zeroed
  // grad buffers first, so repeated calls do not accumulate across passes.
  void backward() const {
    const auto& root = check();
    if (root.value.size() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(root.shape));
    if (!root.requires_grad)
      throw std::invalid_argument("backward: root does not depend on any parameter");

    std::vector<Node<T>*> topo = topo_order();
    for (Node<T>* n : topo)
      if (n->requires_grad) n->grad.assign(n->value.size(), T(0));
    node_->grad[0] = T(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      Node<T>* n = *it;
      if (n->requires_grad && n->backprop) n->backprop(*n);
    }
  }

  Node<T>& node() const { return check(); }

 private:
  static Tensor make_leaf(Shape shape, std::vector<T> data, bool requires_grad) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
      throw std::invalid_argument("leaf: data size does not match shape " + shape_str(shape));
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    Tensor out;
    out.node_ = std::move(node);
    return out;
  }

  Node<T>& check() const {
    if (!node_) throw std::logic_error("use of empty tensor handle");
    return *node_;
  }

  // Iterative post-order DFS; parents are visited in stored order, so the
  // resulting schedule (and thus float accumulation order) is deterministic.
  std::vector<Node<T>*> topo_order() const {
    std::vector<Node<T>*> order;
    std::unordered_set<const Node<T>*> seen;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node<T>* p = n->parents[next++].get();
        if (seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    return order;
  }

  std::shared_ptr<Node<T>> node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace xreid
