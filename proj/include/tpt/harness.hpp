#pragma once

// Training, evaluation, ablation and gradient-check drivers.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tpt/config.hpp"
#include "tpt/metrics.hpp"
#include "tpt/model.hpp"
#include "tpt/regressor.hpp"
#include "tpt/synthetic.hpp"

namespace tpt {

// Intervals over the relative scores of every eligible ordered pair of the
// training split (raw-score deltas within a difficulty level in difficulty mode).
regress::GroupIntervals training_intervals(std::span<const data::ScoredVideo> train,
                                           std::size_t groups, bool difficulty_mode);

struct LossLog {
  double total = 0.0;
  double cls = 0.0;
  double reg = 0.0;
  double order = 0.0;
  double sparsity = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  LossLog loss;  // mean over the epoch's batches
  metrics::EvalReport val;
};

// Everything one trained model needs at inference time.
struct TrainedModel {
  RunConfig config;
  std::unique_ptr<model::AqaModel> model;
  regress::GroupIntervals intervals;
};

struct TrainOptions {
  bool write_artifacts = true;
  std::ostream* log = nullptr;
};

struct TrainResult {
  TrainedModel trained;  // parameters of the best validation epoch
  std::vector<EpochLog> history;
  LossLog first_batch;  // loss of the very first step, before any update
  std::size_t best_epoch = 0;
  metrics::EvalReport best_val;
  std::filesystem::path run_dir;  // empty without artifacts
};

// Fresh model plus training-split intervals; the model seed derives from config.seed.
TrainedModel init_model(const RunConfig& config, const data::Dataset& dataset);

// Mean objective over the given pairs on `tape`, with components logged.
struct BatchLoss {
  ad::Tensor total;
  LossLog log;
};
BatchLoss batch_objective(ad::Tape& tape, const TrainedModel& tm,
                          std::span<const data::TrainPair> pairs);

TrainResult train(const RunConfig& config, const data::Dataset& dataset,
                  const TrainOptions& options = {});

struct EvalResult {
  metrics::EvalReport report;
  std::vector<double> predictions;  // aligned with the evaluated split
  std::vector<std::string> warnings;
};

// Per-exemplar score predictions for one test video.
using PairPredictor = std::function<std::vector<double>(
    const data::ScoredVideo& test, std::span<const data::ScoredVideo* const> exemplars)>;

// Seeded exemplar selection from `pool`, prediction, exemplar fusion and
// metrics against the declared score range. Runs in parallel over videos.
EvalResult evaluate_with(const RunConfig& config, std::span<const data::ScoredVideo> pool,
                         std::span<const data::ScoredVideo> videos, const std::string& split,
                         const PairPredictor& predict);

EvalResult evaluate(const TrainedModel& tm, std::span<const data::ScoredVideo> pool,
                    std::span<const data::ScoredVideo> videos, const std::string& split);

// ---- checkpoints -----------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& tm);
// LoadError on format, version or shape mismatch.
TrainedModel load_checkpoint(const std::filesystem::path& path);

// ---- run directories ---------------------------------------------------------------

// <output_dir>/<hash>-<YYYYmmdd-HHMMSS>, created on demand.
std::filesystem::path make_run_dir(const RunConfig& config);

// ---- ablation ------------------------------------------------------------------------

const std::vector<std::string>& ablation_variants();
// Config for one named variant; ConfigError for unknown names.
RunConfig variant_config(const RunConfig& base, const std::string& variant);

struct AblationRow {
  std::string variant;
  double spearman = 0.0;
  double relative_l2 = 0.0;
};

std::vector<AblationRow> ablate(const RunConfig& base, const data::Dataset& dataset,
                                std::span<const std::string> variants, std::ostream* log = nullptr);
std::string ablation_csv(std::span<const AblationRow> rows);

// ---- gradient check ---------------------------------------------------------------------

struct GradcheckEntry {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;  // one per parameter, store order
  double max_rel_error = 0.0;
  double tolerance = 1e-4;
  bool passed() const { return max_rel_error < tolerance; }
  std::string to_text() const;
};

// Central differences (h = 1e-5) of the full objective on a fixed pair batch.
// Relative error: |a - n| / max(|a|, |n|, 1e-5).
GradcheckReport gradcheck(const RunConfig& config);

// ---- attention export -------------------------------------------------------------------

// Writes video<id>_layer<i>.csv and .pgm for each video; returns the files written.
std::vector<std::filesystem::path> export_attention(const TrainedModel& tm,
                                                    std::span<const data::ScoredVideo> videos,
                                                    const std::filesystem::path& dir,
                                                    std::size_t cell_pixels = 8);
std::string attention_csv(std::span<const double> att, std::size_t rows, std::size_t cols);
// Binary P5 grayscale, each cell scaled to `cell` x `cell` pixels, 255 = map max.
std::string attention_pgm(std::span<const double> att, std::size_t rows, std::size_t cols,
                          std::size_t cell);

}  // namespace tpt
