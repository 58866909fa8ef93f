#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tpt/autodiff.hpp"

namespace tpt::optim {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper);

// Adam over a ParameterStore with one learning rate per parameter group.
class Adam {
 public:
  Adam(ad::ParameterStore& store, AdamHyper defaults, std::map<std::string, double> group_lr);

  void step();
  std::size_t steps() const { return steps_; }
  double lr_for(const std::string& group) const;

 private:
  ad::ParameterStore* store_;
  AdamHyper defaults_;
  std::map<std::string, double> group_lr_;
  std::vector<AdamState> states_;
  std::size_t steps_ = 0;
};

}  // namespace tpt::optim
