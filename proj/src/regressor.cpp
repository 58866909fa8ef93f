#include "tpt/regressor.hpp"

#include <algorithm>
#include <sstream>

#include "tpt/errors.hpp"
#include "tpt/text.hpp"

namespace tpt::regress {

std::vector<double> GroupTarget::one_hot(std::size_t groups) const {
  std::vector<double> l(groups, 0.0);
  l.at(hot) = 1.0;
  return l;
}

GroupIntervals::GroupIntervals(std::vector<double> edges, std::vector<std::size_t> counts)
    : edges_(std::move(edges)), counts_(std::move(counts)) {
  if (edges_.size() < 2 || counts_.size() + 1 != edges_.size()) {
    throw ConfigError("intervals: need B + 1 edges for B counts");
  }
  if (!std::is_sorted(edges_.begin(), edges_.end())) {
    throw ConfigError("intervals: edges must be non-decreasing");
  }
}

std::vector<double> ordered_pair_deltas(std::span<const double> scores) {
  std::vector<double> deltas;
  deltas.reserve(scores.size() * (scores.size() > 0 ? scores.size() - 1 : 0));
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j)
      if (i != j) deltas.push_back(scores[i] - scores[j]);
  return deltas;
}

GroupIntervals GroupIntervals::from_deltas(std::vector<double> deltas, std::size_t groups) {
  if (groups == 0) throw ConfigError("intervals: B must be >= 1");
  if (deltas.empty()) throw ConfigError("intervals: no training pairs");
  std::sort(deltas.begin(), deltas.end());
  std::vector<double> uniq = deltas;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (groups > uniq.size()) {
    throw ConfigError("intervals: B = " + std::to_string(groups) + " exceeds the " +
                      std::to_string(uniq.size()) + " distinct pair deltas");
  }
  const std::size_t N = deltas.size();
  std::vector<double> edges(groups + 1);
  edges.front() = deltas.front();
  edges.back() = deltas.back();
  for (std::size_t n = 1; n < groups; ++n) {
    const std::size_t start = n * N / groups;
    edges[n] = 0.5 * (deltas[start - 1] + deltas[start]);
  }
  GroupIntervals iv(std::move(edges), std::vector<std::size_t>(groups, 0));
  for (double d : deltas) ++iv.counts_[iv.locate(d)];
  return iv;
}

GroupIntervals GroupIntervals::from_scores(std::span<const double> scores, std::size_t groups) {
  if (scores.size() < 2) throw ConfigError("intervals: need at least two training scores");
  return from_deltas(ordered_pair_deltas(scores), groups);
}

std::size_t GroupIntervals::locate(double delta) const {
  const std::size_t B = groups();
  // First interior edge strictly greater than delta.
  const auto it = std::upper_bound(edges_.begin() + 1, edges_.end() - 1, delta);
  const auto n = static_cast<std::size_t>(std::distance(edges_.begin() + 1, it));
  return std::min(n, B - 1);
}

GroupTarget GroupIntervals::encode(double delta) const {
  GroupTarget t;
  t.hot = locate(delta);
  const double width = right(t.hot) - left(t.hot);
  t.gamma = width > 0.0 ? std::clamp((delta - left(t.hot)) / width, 0.0, 1.0) : 0.0;
  return t;
}

double GroupIntervals::decode(std::size_t group, double gamma) const {
  return left(group) + std::clamp(gamma, 0.0, 1.0) * (right(group) - left(group));
}

std::string GroupIntervals::to_csv() const {
  std::ostringstream os;
  os << "n,x_left,x_right,train_pairs\n";
  for (std::size_t n = 0; n < groups(); ++n) {
    os << n + 1 << ',' << text::format_double(left(n)) << ',' << text::format_double(right(n))
       << ',' << counts_[n] << '\n';
  }
  return os.str();
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "partwise" || s == "part-wise") return FusionMode::partwise;
  if (s == "holistic" || s == "part-enhanced-holistic" || s == "part_enhanced_holistic") {
    return FusionMode::part_enhanced_holistic;
  }
  throw ConfigError("unknown fusion mode '" + s + "'");
}

std::string to_string(FusionMode m) {
  return m == FusionMode::partwise ? "partwise" : "part-enhanced-holistic";
}

ExemplarFusion parse_exemplar_fusion(const std::string& s) {
  if (s == "mean") return ExemplarFusion::mean;
  if (s == "median") return ExemplarFusion::median;
  throw ConfigError("unknown exemplar fusion '" + s + "'");
}

std::string to_string(ExemplarFusion m) { return m == ExemplarFusion::mean ? "mean" : "median"; }

// ---- regressor ----------------------------------------------------------------

ContrastiveRegressor::ContrastiveRegressor(ad::ParameterStore& store, std::size_t model_dim,
                                           std::size_t groups, FusionMode mode, Rng& rng)
    : relation_(store, "regressor.relation", 2 * model_dim, model_dim, model_dim, "head", rng),
      cls_head_(store, "regressor.cls", model_dim, model_dim, groups, "head", rng, true),
      reg_head_(store, "regressor.reg", model_dim, model_dim, groups, "head", rng, true),
      mode_(mode),
      groups_(groups) {
  if (groups == 0) throw ConfigError("regressor: B must be >= 1");
}

RegressorOutput ContrastiveRegressor::operator()(ad::Tape& tape, const ad::Tensor& parts,
                                                 const ad::Tensor& exemplar_parts) const {
  if (parts.shape() != exemplar_parts.shape()) {
    throw ContractError("regress: part sets differ in shape " + ad::shape_str(parts.shape()) +
                        " vs " + ad::shape_str(exemplar_parts.shape()));
  }
  ad::Tensor pooled;
  if (mode_ == FusionMode::partwise) {
    const auto relative = relation_(tape, ad::concat({parts, exemplar_parts}, 1));
    pooled = ad::mean(relative, 0);
  } else {
    const auto a = ad::mean(parts, 0);
    const auto b = ad::mean(exemplar_parts, 0);
    pooled = relation_(tape, ad::concat({a, b}, 1));
  }
  return {ad::sigmoid(cls_head_(tape, pooled)), reg_head_(tape, pooled)};
}

double decode_score(std::span<const double> probabilities, std::span<const double> gammas,
                    const GroupIntervals& intervals, double s0, std::optional<double> difficulty) {
  if (probabilities.size() != intervals.groups() || gammas.size() != intervals.groups()) {
    throw DimensionError("decode_score: expected " + std::to_string(intervals.groups()) +
                         " groups");
  }
  std::size_t best = 0;
  for (std::size_t n = 1; n < probabilities.size(); ++n)
    if (probabilities[n] > probabilities[best]) best = n;
  const double s = s0 + intervals.decode(best, gammas[best]);
  return difficulty ? s * *difficulty : s;
}

double fuse_predictions(std::span<const double> predictions, ExemplarFusion fusion) {
  if (predictions.empty()) throw ContractError("fuse_predictions: no exemplar predictions");
  if (fusion == ExemplarFusion::mean) {
    double s = 0.0;
    for (double p : predictions) s += p;
    return s / static_cast<double>(predictions.size());
  }
  std::vector<double> v(predictions.begin(), predictions.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ClsRegLoss classification_regression_loss(const ad::Tensor& probabilities,
                                          const ad::Tensor& gammas, const GroupTarget& target) {
  ad::Tape& tape = probabilities.tape();
  const std::size_t B = probabilities.size();
  if (gammas.size() != B || target.hot >= B) {
    throw DimensionError("classification_regression_loss: group count mismatch");
  }
  const auto p = ad::clamp(ad::reshape(probabilities, {B}), kProbabilityClamp,
                           1.0 - kProbabilityClamp);
  const auto labels = tape.constant({B}, target.one_hot(B));
  const auto ones = tape.constant({B}, std::vector<double>(B, 1.0));
  const auto bce = labels * ad::log(p) + (ones - labels) * ad::log(ones - p);
  ClsRegLoss out;
  out.cls = ad::neg(ad::sum(bce));
  const auto g = ad::slice(ad::reshape(gammas, {B}), 0, target.hot, target.hot + 1);
  out.reg = ad::sum(ad::square(ad::add_scalar(g, -target.gamma)));
  return out;
}

}  // namespace tpt::regress
