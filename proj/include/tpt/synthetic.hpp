#pragma once

// Backbone surrogate: clip-feature sequences with latent, temporally ordered
// phases. Each video is a composition of T clips into K_true non-empty runs;
// run k carries a quality level u_k in [0, 1], and the score is an affine map
// of the weighted qualities into the configured score range.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tpt/rng.hpp"

namespace tpt::data {

struct GeneratorConfig {
  std::size_t clips = 20;        // T
  std::size_t feature_dim = 64;  // D
  std::size_t phases = 5;        // K_true
  std::size_t num_train = 600;
  std::size_t num_val = 100;
  std::size_t num_test = 200;
  std::size_t categories = 1;
  double noise_std = 0.1;
  double score_min = 0.0;
  double score_max = 100.0;
  // Empty disables difficulty mode.
  std::vector<double> difficulty_levels;
  std::uint64_t seed = 1;

  bool difficulty_mode() const { return !difficulty_levels.empty(); }
  void validate() const;
  // [s_min * min difficulty, s_max * max difficulty] in difficulty mode.
  std::pair<double, double> declared_score_range() const;
};

struct ClipMatrix {
  std::size_t clips = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // row-major clips x dim

  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(values).subspan(t * dim, dim);
  }
};

struct ScoredVideo {
  std::size_t id = 0;
  std::size_t category = 0;
  ClipMatrix clips;
  double score = 0.0;      // final score (raw x difficulty in difficulty mode)
  double raw_score = 0.0;  // execution score before difficulty
  std::optional<double> difficulty;
  // K_true + 1 increasing 1-based clip indices, first 1, last T + 1.
  std::vector<std::size_t> phase_boundaries;
  std::vector<double> phase_quality;  // u_k, evaluation metadata only
};

// Fixed per-category generative parameters, drawn once from the seed.
struct CategoryModel {
  std::vector<std::vector<double>> phase_embedding;    // K_true unit vectors
  std::vector<std::vector<double>> quality_direction;  // K_true unit vectors
  std::vector<double> weights;                         // K_true, sums to 1
};

struct Dataset {
  GeneratorConfig config;
  std::vector<CategoryModel> categories;
  std::vector<ScoredVideo> train;
  std::vector<ScoredVideo> val;
  std::vector<ScoredVideo> test;

  const std::vector<ScoredVideo>& split(const std::string& name) const;
};

std::vector<CategoryModel> make_category_models(const GeneratorConfig& config);

double raw_score_from_quality(const GeneratorConfig& config, const CategoryModel& category,
                              std::span<const double> quality);

// Renders one video from explicit latent parameters; noise drawn from `rng`.
ScoredVideo render_video(const GeneratorConfig& config, const CategoryModel& category,
                         std::size_t id, std::size_t category_id,
                         std::vector<std::size_t> boundaries, std::vector<double> quality,
                         std::optional<double> difficulty, Rng& rng);

// Uniform composition of T clips into K non-empty runs, as 1-based boundaries.
std::vector<std::size_t> sample_phase_boundaries(std::size_t clips, std::size_t phases, Rng& rng);

Dataset generate_dataset(const GeneratorConfig& config);

// ---- pairing -----------------------------------------------------------------

struct TrainPair {
  const ScoredVideo* test = nullptr;
  const ScoredVideo* exemplar = nullptr;
  double delta = 0.0;  // on raw scores in difficulty mode
};

bool eligible_exemplar(const ScoredVideo& test, const ScoredVideo& candidate, bool difficulty_mode);
double pair_delta(const ScoredVideo& test, const ScoredVideo& exemplar, bool difficulty_mode);

// Uniform exemplar among eligible videos of `pool`; SamplingError if none.
TrainPair sample_exemplar(std::span<const ScoredVideo> pool, const ScoredVideo& test, Rng& rng,
                          bool difficulty_mode);
// Uniform test video from `pool`, then a uniform eligible exemplar.
TrainPair sample_train_pair(std::span<const ScoredVideo> pool, Rng& rng, bool difficulty_mode);

struct ExemplarSelection {
  std::vector<const ScoredVideo*> exemplars;
  std::string warning;  // non-empty when the pool was smaller than requested
};

// Up to `count` distinct eligible exemplars drawn without replacement; the
// draw depends only on (seed, test.id).
ExemplarSelection select_inference_exemplars(std::span<const ScoredVideo> pool,
                                             const ScoredVideo& test, std::size_t count,
                                             std::uint64_t seed, bool difficulty_mode);

// ---- serialization -------------------------------------------------------------

std::string config_echo(const GeneratorConfig& config);
// Applies one key of config_echo()'s vocabulary; false for unknown keys.
bool set_generator_field(GeneratorConfig& config, const std::string& key,
                         const std::string& value);

void write_split(const std::filesystem::path& path, const GeneratorConfig& config,
                 const std::string& split_name, std::span<const ScoredVideo> videos);

struct SplitFile {
  GeneratorConfig config;
  std::string split_name;
  std::vector<ScoredVideo> videos;
};
SplitFile read_split(const std::filesystem::path& path);

void write_manifest_csv(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace tpt::data
