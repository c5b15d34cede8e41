#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "elfdd/tensor/tensor.hpp"

namespace elfdd {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid as long as its Graph.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  DType dtype() const { return value().dtype(); }
  bool requires_grad() const;
  Graph& graph() const;
  std::uint32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::uint32_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Computes input gradients from the output gradient. `needs[i]` is false
/// when input i does not require a gradient; the returned slot may then be
/// left undefined.
using BackwardFn =
    std::function<std::vector<Tensor>(const Tensor& grad_out, const std::vector<bool>& needs)>;

/// Result of Graph::backward: one gradient per trainable leaf, zero-filled for
/// leaves the loss does not reach.
class Gradients {
 public:
  const Tensor& of(Var leaf) const;
  const Tensor& operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }
  const std::map<std::string, Tensor>& named() const { return by_name_; }

 private:
  friend class Graph;
  std::map<std::uint32_t, Tensor> by_id_;
  std::map<std::string, Tensor> by_name_;
};

/// Tape of operations recorded in execution order, which is a topological
/// order. A Graph is confined to one thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that receives a gradient. Names must be unique when non-empty.
  Var leaf(Tensor value, std::string name = {});
  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Records an op. The node requires a gradient iff any input does; when
  /// none does, `backward` is dropped and nothing is retained for it.
  Var record(std::string_view op, Tensor value, const std::vector<Var>& inputs,
             BackwardFn backward);

  /// Reverse sweep from a single-element root. Every node is visited at most
  /// once, in reverse recording order. `seed` scales the root gradient.
  Gradients backward(Var loss, double seed = 1.0) const;

  std::size_t size() const { return nodes_.size(); }
  std::string_view op_name(Var v) const;
  std::vector<Var> leaves() const;
  /// Whether node `v` lies on a path from any gradient-requiring leaf.
  bool requires_grad(Var v) const;
  const Tensor& value(Var v) const;

 private:
  struct Node {
    std::string op;
    Tensor value;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
    std::string name;
  };

  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  std::map<std::string, std::uint32_t> names_;
};

}  // namespace elfdd
