#pragma once

// Minimal reverse-mode automatic differentiation over dense float64 tensors.
//
// A Tape owns every node created during one forward pass. Tensors are cheap
// handles (tape pointer + node index). Parameters live outside any tape; a
// tape imports a parameter once via Tape::param() and, on backward(), adds
// the node gradient into Parameter::grad(). Callers zero parameter gradients
// themselves before each batch; calling backward() twice without zeroing
// accumulates twice.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tpt::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Parameter {
 public:
  Parameter(std::string name, Shape shape, std::vector<double> values, std::string group,
            bool trainable = true);

  const std::string& name() const { return name_; }
  const Shape& shape() const { return shape_; }
  const std::string& group() const { return group_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }

  bool trainable() const { return trainable_; }
  void set_trainable(bool on) { trainable_ = on; }
  void zero_grad();

 private:
  std::string name_;
  Shape shape_;
  std::string group_;
  std::vector<double> values_;
  std::vector<double> grad_;
  bool trainable_;
};

// Insertion-ordered set of uniquely named parameters with stable addresses.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(std::string name, Shape shape, std::vector<double> values, std::string group);

  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;

  const std::vector<Parameter*>& all() const { return order_; }
  std::size_t size() const { return order_.size(); }
  std::size_t total_size() const;
  void zero_grad();

  // Copies values by name; both stores must hold identical names and shapes.
  void copy_values_from(const ParameterStore& other);

 private:
  std::vector<std::unique_ptr<Parameter>> owned_;
  std::vector<Parameter*> order_;
  std::unordered_map<std::string, Parameter*> index_;
};

class Tape;

class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t id() const { return id_; }

  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  // Empty until backward() reached this node.
  std::span<const double> grad() const;

  double item() const;
  double at(std::size_t i, std::size_t j) const;
  std::vector<double> to_vector() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  // A non-recording tape still computes values but stores no backward rules;
  // used for forward-only evaluation.
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Shape shape, std::vector<double> values);
  Tensor scalar(double value) { return constant({1}, {value}); }
  // Leaf that receives a gradient but is not tied to a Parameter.
  Tensor variable(Shape shape, std::vector<double> values);
  // Imports a parameter; repeated calls return the same node.
  Tensor param(Parameter& p);

  void backward(const Tensor& loss);

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Engine interface used by op implementations.
  Tensor record(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs,
                BackwardFn fn);
  Tensor record(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                BackwardFn fn);
  const Shape& shape(std::size_t id) const { return nodes_[id].shape; }
  std::span<const double> value(std::size_t id) const { return nodes_[id].value; }
  std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }
  // Allocates a zero gradient buffer on first use.
  std::span<double> grad_mut(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  Tensor push(Node node);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool record_;
};

// ---- primitive operations ----------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Binary ops broadcast numpy-style (shapes aligned on the right).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
// Throws DomainError on any non-positive input.
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
// sqrt(x^2 + eps^2); smooth stand-in for |x| where 0 must be differentiable.
inline constexpr double kAbsSmoothEps = 1e-12;
Tensor abs_smooth(const Tensor& a, double eps = kAbsSmoothEps);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// Gradient is passed only where lo < x < hi.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Reductions along one axis keep the reduced axis with extent 1.
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);

Tensor softmax(const Tensor& a, std::size_t axis);

inline constexpr double kLayerNormEps = 1e-5;
// Normalizes over the last axis, without affine parameters.
Tensor layer_norm(const Tensor& a, double eps = kLayerNormEps);

// Same values, no gradient flow.
Tensor detach(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace tpt::ad
