#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tpt::metrics {

// Fractional ranks (1-based, ties share their average rank).
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of average ranks. ContractError on length mismatch or
// fewer than two samples; DomainError when either side is constant.
double spearman(std::span<const double> pred, std::span<const double> truth);

// mean(((|s - s^|) / (s_max - s_min))^2); ConfigError if s_max <= s_min.
double relative_l2(std::span<const double> pred, std::span<const double> truth, double s_min,
                   double s_max);

struct EvalReport {
  double spearman = 0.0;
  double relative_l2 = 0.0;  // raw, not x100
  std::size_t count = 0;
  double s_min = 0.0;
  double s_max = 0.0;
  std::string split;
  std::string config_hash;
  int epoch = -1;

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

EvalReport make_report(std::span<const double> pred, std::span<const double> truth, double s_min,
                       double s_max);

// Appends one CSV row, writing the header if the file is new.
void append_history(const std::filesystem::path& path, const EvalReport& report);

}  // namespace tpt::metrics
