#include "tpt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "tpt/errors.hpp"
#include "tpt/text.hpp"

namespace tpt::metrics {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ContractError("spearman: length mismatch");
  if (pred.size() < 2) throw ContractError("spearman: need at least two samples");
  const auto p = average_ranks(pred);
  const auto q = average_ranks(truth);
  const double n = static_cast<double>(p.size());
  const double pm = std::accumulate(p.begin(), p.end(), 0.0) / n;
  const double qm = std::accumulate(q.begin(), q.end(), 0.0) / n;
  double num = 0.0, sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    num += (p[i] - pm) * (q[i] - qm);
    sp += (p[i] - pm) * (p[i] - pm);
    sq += (q[i] - qm) * (q[i] - qm);
  }
  if (sp == 0.0 || sq == 0.0) throw DomainError("spearman: undefined for constant input");
  return std::clamp(num / std::sqrt(sp * sq), -1.0, 1.0);
}

double relative_l2(std::span<const double> pred, std::span<const double> truth, double s_min,
                   double s_max) {
  if (!(s_max > s_min)) throw ConfigError("relative_l2: s_max must exceed s_min");
  if (pred.size() != truth.size() || pred.empty()) {
    throw ContractError("relative_l2: need equal, non-empty lengths");
  }
  const double range = s_max - s_min;
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = std::abs(truth[i] - pred[i]) / range;
    acc += r * r;
  }
  return acc / static_cast<double>(pred.size());
}

EvalReport make_report(std::span<const double> pred, std::span<const double> truth, double s_min,
                       double s_max) {
  EvalReport r;
  r.spearman = spearman(pred, truth);
  r.relative_l2 = relative_l2(pred, truth, s_min, s_max);
  r.count = pred.size();
  r.s_min = s_min;
  r.s_max = s_max;
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["split"] = split;
  j["epoch"] = epoch;
  j["spearman"] = spearman;
  j["relative_l2"] = relative_l2;
  j["relative_l2_x100"] = relative_l2 * 100.0;
  j["n"] = count;
  j["s_min"] = s_min;
  j["s_max"] = s_max;
  j["config_hash"] = config_hash;
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  EvalReport r;
  r.split = j.value("split", "");
  r.epoch = j.value("epoch", -1);
  r.spearman = j.at("spearman").get<double>();
  r.relative_l2 = j.at("relative_l2").get<double>();
  r.count = j.at("n").get<std::size_t>();
  r.s_min = j.at("s_min").get<double>();
  r.s_max = j.at("s_max").get<double>();
  r.config_hash = j.value("config_hash", "");
  return r;
}

void append_history(const std::filesystem::path& path, const EvalReport& report) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream os(path, std::ios::app);
  if (!os) throw ConfigError("cannot open '" + path.string() + "'");
  if (fresh) os << "config_hash,split,epoch,spearman,relative_l2_x100,n,s_min,s_max\n";
  os << report.config_hash << ',' << report.split << ',' << report.epoch << ','
     << text::format_double(report.spearman) << ','
     << text::format_double(report.relative_l2 * 100.0) << ',' << report.count << ','
     << text::format_double(report.s_min) << ',' << text::format_double(report.s_max) << '\n';
}

}  // namespace tpt::metrics
