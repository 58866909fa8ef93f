#pragma once

// Full scoring model: clip embedding -> part generator -> contrastive
// regressor, plus the combined training objective for one (test, exemplar)
// pair.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "tpt/attention_losses.hpp"
#include "tpt/autodiff.hpp"
#include "tpt/decoder.hpp"
#include "tpt/regressor.hpp"
#include "tpt/synthetic.hpp"

namespace tpt::model {

// tpt: the temporal parsing decoder. The others are ablation part
// generators: baseline mean-pools all clips into one holistic vector,
// adaptive_pool averages K contiguous bins, temporal_conv applies a strided
// convolution with stride floor(T/K).
enum class PartGenerator { tpt, baseline, adaptive_pool, temporal_conv };
PartGenerator parse_part_generator(const std::string& s);
std::string to_string(PartGenerator g);

struct ModelConfig {
  TptConfig tpt;
  PartGenerator generator = PartGenerator::tpt;
  std::size_t clips = 20;  // T, needed by the temporal-conv generator
  std::size_t groups = 4;  // B
  regress::FusionMode fusion = regress::FusionMode::partwise;

  void validate() const;
};

// Adaptive average pooling bin [start, end) for bin k of `bins` over `length`.
std::pair<std::size_t, std::size_t> adaptive_bin(std::size_t k, std::size_t bins,
                                                 std::size_t length);

class AqaModel {
 public:
  AqaModel(const ModelConfig& config, std::uint64_t seed);
  AqaModel(const AqaModel&) = delete;
  AqaModel& operator=(const AqaModel&) = delete;

  // Part set of one video; attention maps are empty for non-TPT generators.
  PartSet parts(ad::Tape& tape, const data::ClipMatrix& clips) const;
  regress::RegressorOutput regress(ad::Tape& tape, const PartSet& test,
                                   const PartSet& exemplar) const;

  ad::ParameterStore& params() { return store_; }
  const ad::ParameterStore& params() const { return store_; }
  const ModelConfig& config() const { return config_; }
  const TemporalParsingDecoder& decoder() const { return *decoder_; }

 private:
  ModelConfig config_;
  ad::ParameterStore store_;
  ClipEmbedding embed_;
  std::optional<TemporalParsingDecoder> decoder_;
  Linear conv_;
  std::size_t conv_kernel_ = 0;
  std::optional<regress::ContrastiveRegressor> regressor_;
};

struct LossWeights {
  double cls = 1.0;
  double reg = 1.0;
  double rank = 1.0;  // weight of the order term (ranking or diversity)
  double sparsity = 1.0;
};

struct ObjectiveConfig {
  LossWeights weights;
  losses::AttentionLossOptions attention;
};

struct PairTerms {
  ad::Tensor total;
  ad::Tensor cls;
  ad::Tensor reg;
  ad::Tensor order;     // layer-summed, averaged over the two videos
  ad::Tensor sparsity;  // layer-summed, averaged over the two videos
};

// lambda_cls L_cls + lambda_reg L_reg + lambda_rank sum_i L_rank^i
//   + lambda_sparsity sum_i L_sparsity^i for one pair.
PairTerms pair_objective(ad::Tape& tape, const AqaModel& model, const PartSet& test,
                         const PartSet& exemplar, const regress::GroupTarget& target,
                         const ObjectiveConfig& objective);

}  // namespace tpt::model
