#pragma once

// Temporal parsing decoder: K learnable queries cross-attend over the
// embedded clip sequence and return K temporally ordered part vectors plus
// the per-layer K x T cross-attention maps.
//
// There is no encoder, and by default no positional encoding: attention is a
// function of clip content only, so permuting clips permutes the attention
// columns. The positional modes exist for the ablation harness.

#include <cstddef>
#include <string>
#include <vector>

#include "tpt/autodiff.hpp"
#include "tpt/layers.hpp"
#include "tpt/rng.hpp"
#include "tpt/synthetic.hpp"

namespace tpt::model {

enum class PositionalMode { off, memory, memory_query };
enum class NormPlacement { post, pre };
enum class SublayerOrder { cross_first, self_first };

PositionalMode parse_positional_mode(const std::string& s);
NormPlacement parse_norm_placement(const std::string& s);
SublayerOrder parse_sublayer_order(const std::string& s);
std::string to_string(PositionalMode m);
std::string to_string(NormPlacement m);
std::string to_string(SublayerOrder m);

struct TptConfig {
  std::size_t input_dim = 64;  // backbone feature dim D
  std::size_t queries = 5;     // K
  std::size_t model_dim = 128; // d
  std::size_t layers = 2;      // L
  std::size_t ffn_dim = 256;
  std::size_t heads = 4;  // self-attention heads; cross-attention is single-head
  double tau_init = 1.0;
  PositionalMode positional = PositionalMode::off;
  NormPlacement norm = NormPlacement::post;
  SublayerOrder order = SublayerOrder::cross_first;

  void validate() const;
};

struct PartSet {
  ad::Tensor parts;                   // K x d, final layer output
  std::vector<ad::Tensor> attention;  // one K x T map per decoder layer
  std::vector<double> temperatures;   // tau used by each layer
};

// Standard transformer sinusoid: even dims sin(pos / 10000^(2i/dim)), odd cos.
std::vector<double> sinusoidal_encoding(std::size_t position, std::size_t dim);

struct CrossAttention {
  ad::Tensor parts;      // K x d
  ad::Tensor attention;  // K x T
};

// Single-head temperature cross-attention with residual part update:
//   alpha[k,t] = softmax_t((p_k + q_k) . v_t / tau),  p'_k = sum_t alpha[k,t] v_t + p_k
// with tau = exp(log_tau). Non-finite attention raises NumericError naming the layer.
CrossAttention cross_attention(const ad::Tensor& parts, const ad::Tensor& queries,
                               const ad::Tensor& memory, const ad::Tensor& log_tau,
                               std::size_t layer_index);

class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(ad::ParameterStore& store, const std::string& name, std::size_t dim,
                         std::size_t heads, const std::string& group, Rng& rng);

  ad::Tensor operator()(ad::Tape& tape, const ad::Tensor& x) const;

 private:
  Linear q_, k_, v_, out_;
  std::size_t heads_ = 1;
  std::size_t dim_ = 0;
};

class DecoderLayer {
 public:
  struct Output {
    ad::Tensor parts;
    ad::Tensor attention;
    double temperature = 1.0;
  };

  DecoderLayer(ad::ParameterStore& store, const std::string& name, const TptConfig& config,
               std::size_t index, Rng& rng);

  Output operator()(ad::Tape& tape, const ad::Tensor& parts, const ad::Tensor& queries,
                    const ad::Tensor& memory) const;

  const ad::Parameter& log_temperature() const { return *log_tau_; }

 private:
  ad::Tensor self_block(ad::Tape& tape, const ad::Tensor& x) const;
  ad::Tensor ffn_block(ad::Tape& tape, const ad::Tensor& x) const;

  ad::Parameter* log_tau_ = nullptr;
  MultiHeadSelfAttention self_attn_;
  LayerNorm norm_self_;
  Mlp2 ffn_;
  LayerNorm norm_ffn_;
  NormPlacement norm_;
  SublayerOrder order_;
  std::size_t index_;
};

// Linear projection D -> d of every clip.
class ClipEmbedding {
 public:
  ClipEmbedding() = default;
  ClipEmbedding(ad::ParameterStore& store, std::size_t input_dim, std::size_t model_dim,
                const std::string& group, Rng& rng);

  ad::Tensor operator()(ad::Tape& tape, const data::ClipMatrix& clips) const;

 private:
  Linear proj_;
  std::size_t input_dim_ = 0;
};

class TemporalParsingDecoder {
 public:
  TemporalParsingDecoder(ad::ParameterStore& store, const TptConfig& config,
                         const std::string& group, Rng& rng);

  // memory: embedded clips, T x d. Throws ContractError when T == 0.
  PartSet decode(ad::Tape& tape, const ad::Tensor& memory) const;

  const TptConfig& config() const { return config_; }
  const ad::Parameter& queries() const { return *queries_; }
  const std::vector<DecoderLayer>& layers() const { return layers_; }

 private:
  TptConfig config_;
  ad::Parameter* queries_ = nullptr;
  std::vector<DecoderLayer> layers_;
};

}  // namespace tpt::model
