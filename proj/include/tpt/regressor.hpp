#pragma once

// Part-aware contrastive regression.
//
// Relative scores are quantized into B contiguous intervals holding equal
// numbers of training pairs. The regressor classifies the interval of the
// relative score and regresses its position gamma inside that interval.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tpt/autodiff.hpp"
#include "tpt/layers.hpp"
#include "tpt/rng.hpp"

namespace tpt::regress {

struct GroupTarget {
  std::size_t hot = 0;  // 0-based interval index
  double gamma = 0.0;   // (delta - left) / (right - left), clamped to [0, 1]

  std::vector<double> one_hot(std::size_t groups) const;
};

class GroupIntervals {
 public:
  GroupIntervals() = default;
  // `edges` holds B + 1 increasing boundaries; `counts` the training pairs per interval.
  GroupIntervals(std::vector<double> edges, std::vector<std::size_t> counts);

  // Equal-count quantile split of the given relative scores. Interior edges
  // sit midway between neighbouring bins. ConfigError if B exceeds the
  // number of distinct deltas.
  static GroupIntervals from_deltas(std::vector<double> deltas, std::size_t groups);
  // Uses every ordered pair (i, j), i != j, of `scores`.
  static GroupIntervals from_scores(std::span<const double> scores, std::size_t groups);

  std::size_t groups() const { return counts_.size(); }
  double left(std::size_t n) const { return edges_[n]; }
  double right(std::size_t n) const { return edges_[n + 1]; }
  const std::vector<double>& edges() const { return edges_; }
  const std::vector<std::size_t>& counts() const { return counts_; }

  // Interval with left <= delta < right, the last one right-closed; values
  // outside the outer edges go to the first or last interval.
  std::size_t locate(double delta) const;
  GroupTarget encode(double delta) const;
  // left + clamp(gamma, 0, 1) * width
  double decode(std::size_t group, double gamma) const;

  std::string to_csv() const;

 private:
  std::vector<double> edges_;
  std::vector<std::size_t> counts_;
};

std::vector<double> ordered_pair_deltas(std::span<const double> scores);

enum class FusionMode { partwise, part_enhanced_holistic };
FusionMode parse_fusion_mode(const std::string& s);
std::string to_string(FusionMode m);

struct RegressorOutput {
  ad::Tensor probabilities;  // 1 x B, sigmoid outputs
  ad::Tensor gammas;         // 1 x B
};

class ContrastiveRegressor {
 public:
  ContrastiveRegressor(ad::ParameterStore& store, std::size_t model_dim, std::size_t groups,
                       FusionMode mode, Rng& rng);

  // parts, exemplar_parts: K x d produced by the same query set.
  RegressorOutput operator()(ad::Tape& tape, const ad::Tensor& parts,
                             const ad::Tensor& exemplar_parts) const;

  FusionMode mode() const { return mode_; }
  std::size_t groups() const { return groups_; }

 private:
  model::Mlp2 relation_;   // f_r, shared across parts
  model::Mlp2 cls_head_;
  model::Mlp2 reg_head_;
  FusionMode mode_;
  std::size_t groups_;
};

// argmax interval (ties -> lowest index), then s0 + decoded delta; the result
// is multiplied by `difficulty` when given (s0 must then be a raw score).
double decode_score(std::span<const double> probabilities, std::span<const double> gammas,
                    const GroupIntervals& intervals, double s0,
                    std::optional<double> difficulty = std::nullopt);

enum class ExemplarFusion { mean, median };
ExemplarFusion parse_exemplar_fusion(const std::string& s);
std::string to_string(ExemplarFusion m);

// Fuses per-exemplar predictions; ContractError on an empty list.
double fuse_predictions(std::span<const double> predictions, ExemplarFusion fusion);

inline constexpr double kProbabilityClamp = 1e-7;

struct ClsRegLoss {
  ad::Tensor cls;  // -sum_n [l_n log p_n + (1 - l_n) log(1 - p_n)]
  ad::Tensor reg;  // (gamma - gamma~)^2 on the hot interval only
};

ClsRegLoss classification_regression_loss(const ad::Tensor& probabilities,
                                          const ad::Tensor& gammas, const GroupTarget& target);

}  // namespace tpt::regress
