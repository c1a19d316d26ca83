#include "spectralprior/tensor.hpp"

#include <cmath>
#include <sstream>

#include "spectralprior/error.hpp"

namespace spectralprior {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(numel(shape_), 0.0) {
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (shape_[i] == 0) throw ShapeError("zero extent in shape " + to_string(shape_), "axis " + std::to_string(i));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (shape_[i] == 0) throw ShapeError("zero extent in shape " + to_string(shape_), "axis " + std::to_string(i));
  }
  if (numel(shape_) != data_.size()) {
    throw ShapeError("shape " + to_string(shape_) + " needs " + std::to_string(numel(shape_)) +
                         " elements, got " + std::to_string(data_.size()),
                     "data length");
  }
}

Tensor Tensor::from_external(Shape shape, std::vector<double> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw ConfigError("non-finite value at element " + std::to_string(i));
    }
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = value;
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_), "numel");
  return data_[0];
}

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

const Tensor& BackwardContext::input(std::size_t i) const { return tape.value(inputs[i]); }
const Tensor& BackwardContext::result() const { return tape.value(output); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.is_leaf = true;
  n.op = "leaf";
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.inputs.reserve(inputs.size());
  for (const auto& v : inputs) {
    if (v.tape_ != this) throw Error(std::string("op '") + op + "' mixes tapes");
    n.inputs.push_back(v.id_);
    n.requires_grad = n.requires_grad || nodes_[v.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

GradientMap Tape::backward(Var loss) {
  if (loss.tape_ != this) throw Error("backward: loss belongs to another tape");
  if (backward_done_) throw Error("backward: already run on this tape");
  if (nodes_[loss.id_].value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + to_string(nodes_[loss.id_].value.shape()), "numel");
  }
  backward_done_ = true;

  for (std::size_t i = 0; i <= loss.id_; ++i) {
    if (nodes_[i].requires_grad) nodes_[i].grad.assign(nodes_[i].value.size(), 0.0);
  }
  if (!nodes_[loss.id_].requires_grad) return {};
  nodes_[loss.id_].grad[0] = 1.0;

  std::vector<std::span<double>> grad_in;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.is_leaf || !n.backward) continue;
    grad_in.clear();
    for (auto in : n.inputs) {
      grad_in.push_back(nodes_[in].requires_grad ? std::span<double>(nodes_[in].grad) : std::span<double>());
    }
    BackwardContext ctx{*this, n.inputs, i, n.grad, grad_in};
    n.backward(ctx);
  }

  GradientMap out;
  for (std::size_t i = 0; i <= loss.id_; ++i) {
    if (nodes_[i].is_leaf && nodes_[i].requires_grad) {
      out.emplace(i, Tensor(nodes_[i].value.shape(), nodes_[i].grad));
    }
  }
  return out;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id_);
  if (!n.requires_grad) throw Error("grad requested for a detached tensor (node " + std::to_string(v.id_) + ")");
  if (!backward_done_ || n.grad.empty()) throw Error("grad requested before backward()");
  return Tensor(n.value.shape(), n.grad);
}

}  // namespace spectralprior
