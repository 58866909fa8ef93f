#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tpt/autodiff.hpp"

namespace tpt::testing {

struct Input {
  ad::Shape shape;
  std::vector<double> values;
};

using ScalarFn = std::function<ad::Tensor(ad::Tape&, const std::vector<ad::Tensor>&)>;

inline double rel_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Largest relative error between backprop and central differences over every
// element of every input.
inline double max_grad_error(const ScalarFn& f, std::vector<Input> inputs, double h = 1e-5,
                             double floor = 1e-5) {
  std::vector<std::vector<double>> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Tensor> xs;
    for (const auto& in : inputs) xs.push_back(tape.variable(in.shape, in.values));
    const auto y = f(tape, xs);
    tape.backward(y);
    for (const auto& x : xs) {
      auto g = x.grad();
      analytic.emplace_back(g.begin(), g.end());
      if (analytic.back().empty()) analytic.back().assign(x.size(), 0.0);
    }
  }
  const auto eval = [&] {
    ad::Tape tape(false);
    std::vector<ad::Tensor> xs;
    for (const auto& in : inputs) xs.push_back(tape.constant(in.shape, in.values));
    return f(tape, xs).item();
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].values.size(); ++i) {
      const double keep = inputs[k].values[i];
      inputs[k].values[i] = keep + h;
      const double up = eval();
      inputs[k].values[i] = keep - h;
      const double down = eval();
      inputs[k].values[i] = keep;
      worst = std::max(worst, rel_error(analytic[k][i], (up - down) / (2 * h), floor));
    }
  }
  return worst;
}

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline Input random_input(ad::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                          double hi = 1.0) {
  const auto n = ad::numel(shape);
  return {std::move(shape), random_values(n, rng, lo, hi)};
}

// Weighted sum with fixed random weights, so every output element matters.
inline ad::Tensor weighted_sum(ad::Tape& tape, const ad::Tensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return ad::sum(y * tape.constant(y.shape(), random_values(y.size(), rng)));
}

}  // namespace tpt::testing
