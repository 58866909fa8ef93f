#include "tpt/optim.hpp"

#include <cmath>

#include "tpt/errors.hpp"

namespace tpt::optim {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper) {
  if (grads.size() != params.size()) throw DimensionError("adam_step: gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw DimensionError("adam_step: state size mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
  }
}

Adam::Adam(ad::ParameterStore& store, AdamHyper defaults, std::map<std::string, double> group_lr)
    : store_(&store),
      defaults_(defaults),
      group_lr_(std::move(group_lr)),
      states_(store.size()) {}

double Adam::lr_for(const std::string& group) const {
  auto it = group_lr_.find(group);
  return it == group_lr_.end() ? defaults_.lr : it->second;
}

void Adam::step() {
  const auto& params = store_->all();
  if (params.size() != states_.size()) throw ContractError("Adam: parameter store changed size");
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = *params[i];
    if (!p.trainable()) continue;
    AdamHyper h = defaults_;
    h.lr = lr_for(p.group());
    adam_step(p.values(), p.grad(), states_[i], h);
  }
  ++steps_;
}

}  // namespace tpt::optim
