#pragma once

// Run configuration as a flat, human-readable key=value file.
//
//   # comment
//   seed = 7
//   data.clips = 20
//   model.generator = tpt
//   loss.rank = 1.0
//
// Every key can be overridden on the command line with --set key=value.
// to_text() emits every key in a fixed order; its FNV-1a hash (excluding
// output_dir) tags all run artifacts.

#include <cstdint>
#include <filesystem>
#include <string>

#include "tpt/model.hpp"
#include "tpt/regressor.hpp"
#include "tpt/synthetic.hpp"

namespace tpt {

struct OptimConfig {
  double lr_backbone = 1e-4;  // embedding + decoder (+ ablation part generators)
  double lr_head = 1e-3;      // contrastive regressor
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct RunConfig {
  data::GeneratorConfig data;
  model::ModelConfig model;
  model::ObjectiveConfig objective;
  OptimConfig optim;
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
  std::size_t exemplars = 10;
  regress::ExemplarFusion exemplar_fusion = regress::ExemplarFusion::mean;
  std::uint64_t seed = 7;
  std::string output_dir = "runs";

  // Applies one key; ConfigError for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  void set_assignment(const std::string& assignment);  // "key=value"
  // Copies data dims into the model config, then validates everything.
  void finalize();

  std::string to_text() const;
  std::string hash() const;

  static RunConfig from_text(const std::string& text);
  static RunConfig from_file(const std::filesystem::path& path);
};

// Small configuration used by gradient checks: T=6, K=3, d=16, L=2.
RunConfig tiny_config();

}  // namespace tpt
