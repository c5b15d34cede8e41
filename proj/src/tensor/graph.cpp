#include "elfdd/tensor/graph.hpp"

namespace elfdd {

const Tensor& Var::value() const { return graph().value(*this); }
bool Var::requires_grad() const { return graph().requires_grad(*this); }

Graph& Var::graph() const {
  if (graph_ == nullptr) throw ValueError("use of an unbound Var");
  return *graph_;
}

const Tensor& Gradients::of(Var leaf) const {
  auto it = by_id_.find(leaf.id());
  if (it == by_id_.end()) throw ValueError("no gradient recorded for this Var (not a leaf?)");
  return it->second;
}

const Tensor& Gradients::operator[](const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ValueError("no gradient for parameter '" + name + "'");
  return it->second;
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph_ != this) throw ValueError("Var belongs to a different graph");
  return nodes_[v.id_];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }
bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }
std::string_view Graph::op_name(Var v) const { return node(v).op; }

Var Graph::leaf(Tensor value, std::string name) {
  if (!value.defined()) throw ValueError("leaf from undefined tensor");
  if (!name.empty()) {
    if (!names_.emplace(name, static_cast<std::uint32_t>(nodes_.size())).second) {
      throw ValueError("duplicate leaf name '" + name + "'");
    }
  }
  nodes_.push_back(Node{"leaf", std::move(value), {}, {}, true, true, std::move(name)});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::constant(Tensor value) {
  if (!value.defined()) throw ValueError("constant from undefined tensor");
  nodes_.push_back(Node{"const", std::move(value), {}, {}, false, false, {}});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::record(std::string_view op, Tensor value, const std::vector<Var>& inputs,
                  BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  for (const auto& in : inputs) {
    n.requires_grad = n.requires_grad || node(in).requires_grad;
    n.inputs.push_back(in.id_);
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

std::vector<Var> Graph::leaves() const {
  std::vector<Var> out;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf) out.push_back(Var(const_cast<Graph*>(this), i));
  }
  return out;
}

Gradients Graph::backward(Var loss, double seed) const {
  const Node& root = node(loss);
  if (root.value.numel() != 1) {
    throw ShapeError("backward: root must be a scalar, got " + shape_string(root.value.shape()));
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id_] = Tensor::full(root.value.shape(), seed, root.value.dtype());

  for (std::int64_t id = loss.id_; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    auto& g = grads[static_cast<std::size_t>(id)];
    if (!g.defined() || !n.requires_grad || n.is_leaf) continue;
    std::vector<bool> needs(n.inputs.size());
    for (std::size_t i = 0; i < n.inputs.size(); ++i) needs[i] = nodes_[n.inputs[i]].requires_grad;
    auto in_grads = n.backward(g, needs);
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      if (!needs[i] || !in_grads[i].defined()) continue;
      auto& slot = grads[n.inputs[i]];
      slot = slot.defined() ? add(slot, in_grads[i]) : std::move(in_grads[i]);
    }
    // Interior gradients are no longer needed once propagated.
    g = Tensor();
  }

  Gradients out;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (!n.is_leaf) continue;
    Tensor g = grads[i].defined() ? grads[i] : Tensor::zeros(n.value.shape(), n.value.dtype());
    if (!n.name.empty()) out.by_name_[n.name] = g;
    out.by_id_[i] = std::move(g);
  }
  return out;
}

}  // namespace elfdd
