#include "tpt/decoder.hpp"

#include <cmath>

#include "tpt/errors.hpp"

namespace tpt::model {

PositionalMode parse_positional_mode(const std::string& s) {
  if (s == "off") return PositionalMode::off;
  if (s == "memory") return PositionalMode::memory;
  if (s == "memory+query" || s == "memory_query") return PositionalMode::memory_query;
  throw ConfigError("unknown positional encoding mode '" + s + "'");
}

NormPlacement parse_norm_placement(const std::string& s) {
  if (s == "post") return NormPlacement::post;
  if (s == "pre") return NormPlacement::pre;
  throw ConfigError("unknown norm placement '" + s + "'");
}

SublayerOrder parse_sublayer_order(const std::string& s) {
  if (s == "cross_first") return SublayerOrder::cross_first;
  if (s == "self_first") return SublayerOrder::self_first;
  throw ConfigError("unknown sub-layer order '" + s + "'");
}

std::string to_string(PositionalMode m) {
  switch (m) {
    case PositionalMode::off: return "off";
    case PositionalMode::memory: return "memory";
    case PositionalMode::memory_query: return "memory+query";
  }
  return "off";
}

std::string to_string(NormPlacement m) { return m == NormPlacement::post ? "post" : "pre"; }

std::string to_string(SublayerOrder m) {
  return m == SublayerOrder::cross_first ? "cross_first" : "self_first";
}

void TptConfig::validate() const {
  if (queries == 0) throw ConfigError("model: queries (K) must be >= 1");
  if (model_dim == 0 || input_dim == 0 || ffn_dim == 0) {
    throw ConfigError("model: dimensions must be positive");
  }
  if (layers == 0) throw ConfigError("model: need at least one decoder layer");
  if (heads == 0 || model_dim % heads != 0) {
    throw ConfigError("model: model_dim " + std::to_string(model_dim) +
                      " not divisible by heads " + std::to_string(heads));
  }
  if (!(tau_init > 0.0)) throw ConfigError("model: tau_init must be positive");
}

std::vector<double> sinusoidal_encoding(std::size_t position, std::size_t dim) {
  std::vector<double> pe(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const double pair = static_cast<double>(j - j % 2);
    const double angle =
        static_cast<double>(position) / std::pow(10000.0, pair / static_cast<double>(dim));
    pe[j] = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return pe;
}

CrossAttention cross_attention(const ad::Tensor& parts, const ad::Tensor& queries,
                               const ad::Tensor& memory, const ad::Tensor& log_tau,
                               std::size_t layer_index) {
  const auto logits = ad::matmul(parts + queries, ad::transpose(memory));
  const auto scaled = logits * ad::exp(ad::neg(log_tau));
  auto attention = ad::softmax(scaled, 1);
  for (double a : attention.values()) {
    if (!std::isfinite(a)) {
      throw NumericError("cross-attention in decoder layer " + std::to_string(layer_index) +
                         " produced a non-finite value");
    }
  }
  auto updated = ad::matmul(attention, memory) + parts;
  return {updated, attention};
}

// ---- self-attention --------------------------------------------------------

MultiHeadSelfAttention::MultiHeadSelfAttention(ad::ParameterStore& store, const std::string& name,
                                               std::size_t dim, std::size_t heads,
                                               const std::string& group, Rng& rng)
    : q_(store, name + ".q", dim, dim, group, rng),
      k_(store, name + ".k", dim, dim, group, rng),
      v_(store, name + ".v", dim, dim, group, rng),
      out_(store, name + ".out", dim, dim, group, rng),
      heads_(heads),
      dim_(dim) {}

ad::Tensor MultiHeadSelfAttention::operator()(ad::Tape& tape, const ad::Tensor& x) const {
  const auto q = q_(tape, x);
  const auto k = k_(tape, x);
  const auto v = v_(tape, x);
  const std::size_t hd = dim_ / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<ad::Tensor> heads;
  heads.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    const auto qh = ad::slice(q, 1, h * hd, (h + 1) * hd);
    const auto kh = ad::slice(k, 1, h * hd, (h + 1) * hd);
    const auto vh = ad::slice(v, 1, h * hd, (h + 1) * hd);
    const auto weights = ad::softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt), 1);
    heads.push_back(ad::matmul(weights, vh));
  }
  return out_(tape, heads_ == 1 ? heads.front() : ad::concat(heads, 1));
}

// ---- decoder layer ---------------------------------------------------------

DecoderLayer::DecoderLayer(ad::ParameterStore& store, const std::string& name,
                           const TptConfig& config, std::size_t index, Rng& rng)
    : norm_(config.norm), order_(config.order), index_(index) {
  log_tau_ = &store.add(name + ".log_tau", {1}, {std::log(config.tau_init)}, "backbone");
  self_attn_ = MultiHeadSelfAttention(store, name + ".self_attn", config.model_dim, config.heads,
                                      "backbone", rng);
  norm_self_ = LayerNorm(store, name + ".norm_self", config.model_dim, "backbone");
  ffn_ = Mlp2(store, name + ".ffn", config.model_dim, config.ffn_dim, config.model_dim, "backbone",
              rng);
  norm_ffn_ = LayerNorm(store, name + ".norm_ffn", config.model_dim, "backbone");
}

ad::Tensor DecoderLayer::self_block(ad::Tape& tape, const ad::Tensor& x) const {
  if (norm_ == NormPlacement::post) return norm_self_(tape, x + self_attn_(tape, x));
  return x + self_attn_(tape, norm_self_(tape, x));
}

ad::Tensor DecoderLayer::ffn_block(ad::Tape& tape, const ad::Tensor& x) const {
  if (norm_ == NormPlacement::post) return norm_ffn_(tape, x + ffn_(tape, x));
  return x + ffn_(tape, norm_ffn_(tape, x));
}

DecoderLayer::Output DecoderLayer::operator()(ad::Tape& tape, const ad::Tensor& parts,
                                              const ad::Tensor& queries,
                                              const ad::Tensor& memory) const {
  const auto log_tau = tape.param(*log_tau_);
  ad::Tensor x = parts;
  if (order_ == SublayerOrder::self_first) x = self_block(tape, x);
  auto cross = cross_attention(x, queries, memory, log_tau, index_);
  x = cross.parts;
  if (order_ == SublayerOrder::cross_first) x = self_block(tape, x);
  x = ffn_block(tape, x);
  return {x, cross.attention, std::exp(log_tau.item())};
}

// ---- embedding + decoder ----------------------------------------------------

ClipEmbedding::ClipEmbedding(ad::ParameterStore& store, std::size_t input_dim,
                             std::size_t model_dim, const std::string& group, Rng& rng)
    : proj_(store, "embed", input_dim, model_dim, group, rng), input_dim_(input_dim) {}

ad::Tensor ClipEmbedding::operator()(ad::Tape& tape, const data::ClipMatrix& clips) const {
  if (clips.clips == 0) throw ContractError("clip embedding: video has no clips");
  if (clips.dim != input_dim_) {
    throw DimensionError("clip embedding: expected feature dim " + std::to_string(input_dim_) +
                         ", got " + std::to_string(clips.dim));
  }
  return proj_(tape, tape.constant({clips.clips, clips.dim}, clips.values));
}

TemporalParsingDecoder::TemporalParsingDecoder(ad::ParameterStore& store, const TptConfig& config,
                                               const std::string& group, Rng& rng)
    : config_(config) {
  config_.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> q(config.queries * config.model_dim);
  for (auto& x : q) x = normal(rng);
  queries_ = &store.add("decoder.queries", {config.queries, config.model_dim}, std::move(q), group);
  for (std::size_t i = 0; i < config.layers; ++i) {
    layers_.emplace_back(store, "decoder.layer" + std::to_string(i), config_, i, rng);
  }
}

PartSet TemporalParsingDecoder::decode(ad::Tape& tape, const ad::Tensor& memory_in) const {
  const std::size_t T = memory_in.rows();
  const std::size_t K = config_.queries, d = config_.model_dim;
  if (T == 0) throw ContractError("decode: video has no clips");
  if (memory_in.cols() != d) {
    throw DimensionError("decode: memory width " + std::to_string(memory_in.cols()) +
                         " != model dim " + std::to_string(d));
  }

  ad::Tensor memory = memory_in;
  ad::Tensor queries = tape.param(*queries_);
  if (config_.positional != PositionalMode::off) {
    std::vector<double> pe;
    pe.reserve(T * d);
    for (std::size_t t = 0; t < T; ++t) {
      auto row = sinusoidal_encoding(t, d);
      pe.insert(pe.end(), row.begin(), row.end());
    }
    memory = memory + tape.constant({T, d}, std::move(pe));
  }
  if (config_.positional == PositionalMode::memory_query) {
    const std::size_t stride = T / K;
    std::vector<double> pe;
    pe.reserve(K * d);
    for (std::size_t k = 0; k < K; ++k) {
      auto row = sinusoidal_encoding(stride * k, d);
      pe.insert(pe.end(), row.begin(), row.end());
    }
    queries = queries + tape.constant({K, d}, std::move(pe));
  }

  PartSet out;
  ad::Tensor parts = tape.constant({K, d}, std::vector<double>(K * d, 0.0));
  for (const auto& layer : layers_) {
    auto o = layer(tape, parts, queries, memory);
    parts = o.parts;
    out.attention.push_back(o.attention);
    out.temperatures.push_back(o.temperature);
  }
  out.parts = parts;
  return out;
}

}  // namespace tpt::model
