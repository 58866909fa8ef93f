#pragma once

#include <cstddef>
#include <string>

#include "tpt/autodiff.hpp"
#include "tpt/rng.hpp"

namespace tpt::model {

// Xavier-uniform weights, zero bias; `zero_init` zeroes the weights too.
class Linear {
 public:
  Linear() = default;
  Linear(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
         const std::string& group, Rng& rng, bool zero_init = false);

  // x: [n x in] -> [n x out]
  ad::Tensor operator()(ad::Tape& tape, const ad::Tensor& x) const;

  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }

 private:
  ad::Parameter* weight_ = nullptr;
  ad::Parameter* bias_ = nullptr;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

// Layer normalization over the last axis with learned gain and shift.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ad::ParameterStore& store, const std::string& name, std::size_t dim,
            const std::string& group);

  ad::Tensor operator()(ad::Tape& tape, const ad::Tensor& x) const;

 private:
  ad::Parameter* gain_ = nullptr;
  ad::Parameter* shift_ = nullptr;
};

// Linear -> ReLU -> Linear.
class Mlp2 {
 public:
  Mlp2() = default;
  Mlp2(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
       std::size_t out, const std::string& group, Rng& rng, bool zero_init_output = false);

  ad::Tensor operator()(ad::Tape& tape, const ad::Tensor& x) const;

 private:
  Linear first_;
  Linear second_;
};

}  // namespace tpt::model
