#include "tpt/attention_losses.hpp"

#include <cmath>

#include "tpt/errors.hpp"

namespace tpt::losses {

namespace {

ad::Tensor clip_index_column(ad::Tape& tape, std::size_t clips) {
  std::vector<double> idx(clips);
  for (std::size_t t = 0; t < clips; ++t) idx[t] = static_cast<double>(t + 1);
  return tape.constant({clips, 1}, std::move(idx));
}

}  // namespace

ad::Tensor attention_center(const ad::Tensor& attention) {
  const std::size_t K = attention.rows(), T = attention.cols();
  auto a = attention.values();
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) s += a[k * T + t];
    if (std::abs(s - 1.0) > 1e-4) {
      throw ContractError("attention_center: row " + std::to_string(k) + " sums to " +
                          std::to_string(s));
    }
  }
  return ad::matmul(attention, clip_index_column(attention.tape(), T));
}

ad::Tensor ranking_loss(const ad::Tensor& centers, std::size_t clips, double margin) {
  ad::Tape& tape = centers.tape();
  const std::size_t K = centers.size();
  const auto col = ad::reshape(centers, {K, 1});
  // Extended sequence [1, c_1 .. c_K, T]; hinge on every consecutive pair.
  const auto ext = ad::concat({tape.scalar(1.0), ad::reshape(col, {K}),
                               tape.scalar(static_cast<double>(clips))},
                              0);
  const auto lower = ad::slice(ext, 0, 0, K + 1);
  const auto upper = ad::slice(ext, 0, 1, K + 2);
  return ad::sum(ad::relu(ad::add_scalar(lower - upper, margin)));
}

ad::Tensor sparsity_loss(const ad::Tensor& attention, const ad::Tensor& centers,
                         bool detach_centers) {
  ad::Tape& tape = attention.tape();
  const std::size_t K = attention.rows(), T = attention.cols();
  std::vector<double> idx(T);
  for (std::size_t t = 0; t < T; ++t) idx[t] = static_cast<double>(t + 1);
  const auto index_row = tape.constant({1, T}, std::move(idx));
  auto c = ad::reshape(centers, {K, 1});
  if (detach_centers) c = ad::detach(c);
  const auto spread = ad::abs_smooth(index_row - c);
  return ad::sum(spread * attention);
}

ad::Tensor diversity_loss(const ad::Tensor& centers, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("diversity_loss: sigma must be positive");
  ad::Tape& tape = centers.tape();
  const std::size_t K = centers.size();
  const auto col = ad::reshape(centers, {K, 1});
  const auto row = ad::reshape(centers, {1, K});
  const auto sq = ad::square(col - row);
  const auto kernel = ad::exp(ad::scale(sq, -1.0 / (2.0 * sigma * sigma)));
  std::vector<double> upper(K * K, 0.0);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = i + 1; j < K; ++j) upper[i * K + j] = 1.0;
  return ad::sum(kernel * tape.constant({K, K}, std::move(upper)));
}

AttentionLossSums aggregate_attention_losses(const std::vector<ad::Tensor>& maps,
                                             const AttentionLossOptions& options) {
  if (maps.empty()) throw ContractError("aggregate_attention_losses: no attention maps");
  ad::Tape& tape = maps.front().tape();
  std::vector<ad::Tensor> order_terms, sparsity_terms;
  for (const auto& m : maps) {
    const auto centers = attention_center(m);
    switch (options.order) {
      case OrderLoss::rank:
        order_terms.push_back(ranking_loss(centers, m.cols(), options.margin));
        break;
      case OrderLoss::diversity:
        order_terms.push_back(diversity_loss(centers, options.sigma));
        break;
      case OrderLoss::none:
        break;
    }
    sparsity_terms.push_back(sparsity_loss(m, centers, options.detach_centers));
  }
  AttentionLossSums out;
  out.order = order_terms.empty() ? tape.scalar(0.0) : ad::sum(ad::concat(order_terms, 0));
  out.sparsity = ad::sum(ad::concat(sparsity_terms, 0));
  return out;
}

}  // namespace tpt::losses
