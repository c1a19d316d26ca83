#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spectralprior {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of f64. Scalars have shape {1}.
class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  /// Construction from data that came from outside the engine (files, user
  /// buffers): rejects NaN/Inf.
  static Tensor from_external(Shape shape, std::vector<double> data);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Rank-3 [C,H,W] element access.
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  double item() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// What a primitive's backward rule sees. `grad_in[i]` is empty when input i
/// does not require a gradient; rules accumulate (+=) into the non-empty ones.
struct BackwardContext {
  const Tape& tape;
  std::span<const std::size_t> inputs;
  std::size_t output;
  std::span<const double> grad_out;
  std::span<const std::span<double>> grad_in;

  const Tensor& input(std::size_t i) const;
  const Tensor& result() const;
};

using BackwardFn = std::function<void(const BackwardContext&)>;
using GradientMap = std::map<std::size_t, Tensor>;

/// Append-only record of primitive applications. Nodes are stored in creation
/// order, so inputs always precede their consumers and reverse iteration is a
/// valid topological order for backpropagation.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Record the result of a primitive. `backward` is dropped when no input
  /// requires a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op);

  /// Reverse sweep from a scalar loss. Returns the gradient of every leaf that
  /// requires one, keyed by node id. May be called once per tape.
  GradientMap backward(Var loss);

  /// Gradient of a node after backward(). Throws for nodes that are detached
  /// (do not require grad) or when backward() has not run.
  Tensor grad(Var v) const;

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::string_view op_name(std::size_t id) const { return nodes_.at(id).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
    const char* op = "";
    std::vector<double> grad;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace spectralprior
