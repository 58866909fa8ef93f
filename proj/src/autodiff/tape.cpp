#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tpt/autodiff.hpp"
#include "tpt/errors.hpp"

namespace tpt::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---- Parameter -------------------------------------------------------------

Parameter::Parameter(std::string name, Shape shape, std::vector<double> values, std::string group,
                     bool trainable)
    : name_(std::move(name)),
      shape_(std::move(shape)),
      group_(std::move(group)),
      values_(std::move(values)),
      grad_(values_.size(), 0.0),
      trainable_(trainable) {
  if (shape_.empty() || numel(shape_) != values_.size()) {
    throw DimensionError("parameter '" + name_ + "': shape " + shape_str(shape_) + " holds " +
                         std::to_string(numel(shape_)) + " values, got " +
                         std::to_string(values_.size()));
  }
}

void Parameter::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

// ---- ParameterStore --------------------------------------------------------

Parameter& ParameterStore::add(std::string name, Shape shape, std::vector<double> values,
                               std::string group) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  auto p = std::make_unique<Parameter>(name, std::move(shape), std::move(values), std::move(group));
  Parameter* raw = p.get();
  owned_.push_back(std::move(p));
  order_.push_back(raw);
  index_.emplace(std::move(name), raw);
  return *raw;
}

Parameter* ParameterStore::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : it->second;
}

Parameter& ParameterStore::at(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

const Parameter& ParameterStore::at(std::string_view name) const {
  if (const auto* p = find(name)) return *p;
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

std::size_t ParameterStore::total_size() const {
  std::size_t n = 0;
  for (const auto* p : order_) n += p->size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto* p : order_) p->zero_grad();
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.size() != size()) throw ContractError("parameter stores differ in size");
  for (auto* p : order_) {
    const Parameter& src = other.at(p->name());
    if (src.shape() != p->shape()) {
      throw DimensionError("parameter '" + p->name() + "': shape " + shape_str(p->shape()) +
                           " vs " + shape_str(src.shape()));
    }
    std::copy(src.values().begin(), src.values().end(), p->values().begin());
  }
}

// ---- Tensor ----------------------------------------------------------------

Tape& Tensor::tape() const {
  if (!tape_) throw ContractError("use of an empty tensor handle");
  return *tape_;
}

const Shape& Tensor::shape() const { return tape().shape(id_); }
std::size_t Tensor::size() const { return numel(shape()); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("rows() on non-matrix " + shape_str(s));
  return s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("cols() on non-matrix " + shape_str(s));
  return s[1];
}

std::span<const double> Tensor::values() const { return tape().value(id_); }
std::span<const double> Tensor::grad() const { return tape().grad(id_); }

double Tensor::item() const {
  auto v = values();
  if (v.size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return v[0];
}

double Tensor::at(std::size_t i, std::size_t j) const { return values()[i * cols() + j]; }

std::vector<double> Tensor::to_vector() const {
  auto v = values();
  return {v.begin(), v.end()};
}

// ---- Tape ------------------------------------------------------------------

Tensor Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::constant(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size()) {
    throw DimensionError("constant of shape " + shape_str(shape) + " given " +
                         std::to_string(values.size()) + " values");
  }
  return push(Node{std::move(shape), std::move(values), {}, {}, nullptr, false});
}

Tensor Tape::variable(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  nodes_[t.id()].needs_grad = record_;
  return t;
}

Tensor Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Tensor(this, it->second);
  auto vals = p.values();
  Tensor t = push(Node{p.shape(), std::vector<double>(vals.begin(), vals.end()), {}, {}, &p,
                       record_ && p.trainable()});
  param_nodes_.emplace(&p, t.id());
  return t;
}

Tensor Tape::record(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs,
                    BackwardFn fn) {
  bool needs = false;
  if (record_) {
    for (const auto& in : inputs) needs = needs || nodes_[in.id()].needs_grad;
  }
  return push(Node{std::move(shape), std::move(values), {}, needs ? std::move(fn) : BackwardFn{},
                   nullptr, needs});
}

Tensor Tape::record(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                    BackwardFn fn) {
  bool needs = false;
  if (record_) {
    for (const auto& in : inputs) needs = needs || nodes_[in.id()].needs_grad;
  }
  return push(Node{std::move(shape), std::move(values), {}, needs ? std::move(fn) : BackwardFn{},
                   nullptr, needs});
}

std::span<double> Tape::grad_mut(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(const Tensor& loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss is not on this tape");
  const std::size_t root = loss.id();
  if (nodes_[root].value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(nodes_[root].shape));
  }
  if (!record_) throw ContractError("backward on a non-recording tape");

  for (auto& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  grad_mut(root)[0] = 1.0;

  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }

  for (auto& n : nodes_) {
    if (n.param == nullptr || n.grad.empty()) continue;
    auto dst = n.param->grad();
    for (std::size_t j = 0; j < dst.size(); ++j) {
      if (!std::isfinite(n.grad[j])) {
        throw NumericError("backward: non-finite gradient for parameter '" + n.param->name() +
                           "'");
      }
      dst[j] += n.grad[j];
    }
  }
}

}  // namespace tpt::ad
