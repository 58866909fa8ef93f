#pragma once

// Supervision-free signals on decoder cross-attention maps.
//
// All functions take a K x T attention map (rows sum to 1) or the K x 1
// column of attention centers derived from it, and return differentiable
// scalars on the same tape. Clip indices are 1-based.

#include <cstddef>
#include <vector>

#include "tpt/autodiff.hpp"

namespace tpt::losses {

// center[k] = sum_t t * alpha[k,t]. ContractError when a row sum deviates
// from 1 by more than 1e-4.
ad::Tensor attention_center(const ad::Tensor& attention);

// Margin ranking over consecutive centers, with virtual centers 1 and T at
// the two ends:
//   sum_k max(0, c_k - c_{k+1} + m) + max(0, 1 - c_1 + m) + max(0, c_K - T + m)
ad::Tensor ranking_loss(const ad::Tensor& centers, std::size_t clips, double margin);

// sum_k sum_t |t - c_k| * alpha[k,t]; gradient reaches alpha both directly and
// through the centers unless `detach_centers` is set.
ad::Tensor sparsity_loss(const ad::Tensor& attention, const ad::Tensor& centers,
                         bool detach_centers = false);

// sum_{i<j} exp(-(c_i - c_j)^2 / (2 sigma^2)); order-free ablation baseline.
ad::Tensor diversity_loss(const ad::Tensor& centers, double sigma);

enum class OrderLoss { rank, diversity, none };

struct AttentionLossOptions {
  double margin = 1.0;
  OrderLoss order = OrderLoss::rank;
  double sigma = 2.0;
  bool detach_centers = false;
};

struct AttentionLossSums {
  ad::Tensor order;     // sum over layers of the ranking (or diversity) loss
  ad::Tensor sparsity;  // sum over layers of the sparsity loss
};

// Per-layer losses summed (not averaged) over all maps. With
// OrderLoss::none the order term is a zero constant.
AttentionLossSums aggregate_attention_losses(const std::vector<ad::Tensor>& maps,
                                             const AttentionLossOptions& options);

}  // namespace tpt::losses
