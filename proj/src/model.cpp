#include "tpt/model.hpp"

#include "tpt/errors.hpp"

namespace tpt::model {

PartGenerator parse_part_generator(const std::string& s) {
  if (s == "tpt") return PartGenerator::tpt;
  if (s == "baseline") return PartGenerator::baseline;
  if (s == "adaptive_pool" || s == "adaptive_pooling") return PartGenerator::adaptive_pool;
  if (s == "temporal_conv") return PartGenerator::temporal_conv;
  throw ConfigError("unknown part generator '" + s + "'");
}

std::string to_string(PartGenerator g) {
  switch (g) {
    case PartGenerator::tpt: return "tpt";
    case PartGenerator::baseline: return "baseline";
    case PartGenerator::adaptive_pool: return "adaptive_pool";
    case PartGenerator::temporal_conv: return "temporal_conv";
  }
  return "tpt";
}

void ModelConfig::validate() const {
  tpt.validate();
  if (groups == 0) throw ConfigError("model: B must be >= 1");
  if ((generator == PartGenerator::temporal_conv || generator == PartGenerator::adaptive_pool) &&
      clips < tpt.queries) {
    throw ConfigError("model: pooling generators need T >= K");
  }
}

std::pair<std::size_t, std::size_t> adaptive_bin(std::size_t k, std::size_t bins,
                                                 std::size_t length) {
  const std::size_t start = k * length / bins;
  const std::size_t end = ((k + 1) * length + bins - 1) / bins;
  return {start, end};
}

AqaModel::AqaModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const auto& t = config_.tpt;
  embed_ = ClipEmbedding(store_, t.input_dim, t.model_dim, "backbone", rng);
  decoder_.emplace(store_, t, "backbone", rng);
  if (config_.generator == PartGenerator::temporal_conv) {
    const std::size_t stride = config_.clips / t.queries;
    conv_kernel_ = config_.clips - (t.queries - 1) * stride;
    conv_ = Linear(store_, "temporal_conv", conv_kernel_ * t.model_dim, t.model_dim, "backbone",
                   rng);
  }
  regressor_.emplace(store_, t.model_dim, config_.groups, config_.fusion, rng);
}

PartSet AqaModel::parts(ad::Tape& tape, const data::ClipMatrix& clips) const {
  const auto memory = embed_(tape, clips);
  const std::size_t T = clips.clips, K = config_.tpt.queries, d = config_.tpt.model_dim;
  switch (config_.generator) {
    case PartGenerator::tpt:
      return decoder_->decode(tape, memory);
    case PartGenerator::baseline:
      return PartSet{ad::mean(memory, 0), {}, {}};
    case PartGenerator::adaptive_pool: {
      if (T < K) throw ContractError("adaptive pooling: fewer clips than parts");
      std::vector<double> pool(K * T, 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        const auto [b, e] = adaptive_bin(k, K, T);
        for (std::size_t j = b; j < e; ++j) pool[k * T + j] = 1.0 / static_cast<double>(e - b);
      }
      return PartSet{ad::matmul(tape.constant({K, T}, std::move(pool)), memory), {}, {}};
    }
    case PartGenerator::temporal_conv: {
      if (T != config_.clips) {
        throw DimensionError("temporal conv: model built for T = " +
                             std::to_string(config_.clips) + ", got " + std::to_string(T));
      }
      const std::size_t stride = T / K;
      std::vector<ad::Tensor> windows;
      for (std::size_t k = 0; k < K; ++k) {
        const auto w = ad::slice(memory, 0, k * stride, k * stride + conv_kernel_);
        windows.push_back(ad::reshape(w, {1, conv_kernel_ * d}));
      }
      return PartSet{conv_(tape, ad::concat(windows, 0)), {}, {}};
    }
  }
  throw ContractError("unreachable part generator");
}

regress::RegressorOutput AqaModel::regress(ad::Tape& tape, const PartSet& test,
                                           const PartSet& exemplar) const {
  return (*regressor_)(tape, test.parts, exemplar.parts);
}

PairTerms pair_objective(ad::Tape& tape, const AqaModel& model, const PartSet& test,
                         const PartSet& exemplar, const regress::GroupTarget& target,
                         const ObjectiveConfig& objective) {
  const auto out = model.regress(tape, test, exemplar);
  const auto cr = regress::classification_regression_loss(out.probabilities, out.gammas, target);
  PairTerms terms;
  terms.cls = cr.cls;
  terms.reg = cr.reg;
  if (test.attention.empty() || exemplar.attention.empty()) {
    terms.order = tape.scalar(0.0);
    terms.sparsity = tape.scalar(0.0);
  } else {
    const auto a = losses::aggregate_attention_losses(test.attention, objective.attention);
    const auto b = losses::aggregate_attention_losses(exemplar.attention, objective.attention);
    terms.order = ad::scale(a.order + b.order, 0.5);
    terms.sparsity = ad::scale(a.sparsity + b.sparsity, 0.5);
  }
  const auto& w = objective.weights;
  terms.total = ad::scale(terms.cls, w.cls) + ad::scale(terms.reg, w.reg) +
                ad::scale(terms.order, w.rank) + ad::scale(terms.sparsity, w.sparsity);
  return terms;
}

}  // namespace tpt::model
