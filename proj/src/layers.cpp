#include "tpt/layers.hpp"

#include <cmath>

namespace tpt::model {

Linear::Linear(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               const std::string& group, Rng& rng, bool zero_init)
    : in_(in), out_(out) {
  std::vector<double> w(in * out, 0.0);
  if (!zero_init) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : w) x = dist(rng);
  }
  weight_ = &store.add(name + ".weight", {in, out}, std::move(w), group);
  bias_ = &store.add(name + ".bias", {out}, std::vector<double>(out, 0.0), group);
}

ad::Tensor Linear::operator()(ad::Tape& tape, const ad::Tensor& x) const {
  return ad::matmul(x, tape.param(*weight_)) + tape.param(*bias_);
}

LayerNorm::LayerNorm(ad::ParameterStore& store, const std::string& name, std::size_t dim,
                     const std::string& group) {
  gain_ = &store.add(name + ".gain", {dim}, std::vector<double>(dim, 1.0), group);
  shift_ = &store.add(name + ".shift", {dim}, std::vector<double>(dim, 0.0), group);
}

ad::Tensor LayerNorm::operator()(ad::Tape& tape, const ad::Tensor& x) const {
  return ad::layer_norm(x) * tape.param(*gain_) + tape.param(*shift_);
}

Mlp2::Mlp2(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
           std::size_t out, const std::string& group, Rng& rng, bool zero_init_output)
    : first_(store, name + ".fc1", in, hidden, group, rng),
      second_(store, name + ".fc2", hidden, out, group, rng, zero_init_output) {}

ad::Tensor Mlp2::operator()(ad::Tape& tape, const ad::Tensor& x) const {
  return second_(tape, ad::relu(first_(tape, x)));
}

}  // namespace tpt::model
