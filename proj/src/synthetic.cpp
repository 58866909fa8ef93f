#include "tpt/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "tpt/errors.hpp"
#include "tpt/text.hpp"

namespace tpt::data {

namespace {

constexpr std::uint64_t kCategoryStream = 0xC47E;
constexpr std::uint64_t kSplitStream[3] = {0x7EA1, 0x7A11, 0x7E57};

std::vector<double> random_unit_vector(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    for (auto& x : v) x = normal(rng);
    norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  } while (norm < 1e-12);
  for (auto& x : v) x /= norm;
  return v;
}

ScoredVideo sample_video(const GeneratorConfig& config, const std::vector<CategoryModel>& models,
                         std::size_t id, Rng& rng) {
  const std::size_t category = id % config.categories;
  auto boundaries = sample_phase_boundaries(config.clips, config.phases, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> quality(config.phases);
  for (auto& u : quality) u = unit(rng);
  std::optional<double> difficulty;
  if (config.difficulty_mode()) {
    std::uniform_int_distribution<std::size_t> pick(0, config.difficulty_levels.size() - 1);
    difficulty = config.difficulty_levels[pick(rng)];
  }
  return render_video(config, models[category], id, category, std::move(boundaries),
                      std::move(quality), difficulty, rng);
}

std::vector<ScoredVideo> generate_split(const GeneratorConfig& config,
                                        const std::vector<CategoryModel>& models,
                                        std::size_t first_id, std::size_t count,
                                        std::uint64_t stream) {
  std::vector<ScoredVideo> out(count);
  const std::uint64_t split_seed = mix_seed(config.seed, stream);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(count); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    Rng rng(mix_seed(split_seed, i));
    out[i] = sample_video(config, models, first_id + i, rng);
  }
  return out;
}

std::string join(std::span<const double> xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += text::format_double(xs[i]);
  }
  return s;
}

std::string join(std::span<const std::size_t> xs, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(xs[i]);
  }
  return s;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (clips == 0) throw ConfigError("generator: clips must be positive");
  if (feature_dim == 0) throw ConfigError("generator: feature_dim must be positive");
  if (phases == 0) throw ConfigError("generator: phases must be positive");
  if (phases > clips) {
    throw ConfigError("generator: phases (" + std::to_string(phases) + ") exceed clips (" +
                      std::to_string(clips) + ")");
  }
  if (categories == 0) throw ConfigError("generator: categories must be positive");
  if (!(score_min < score_max)) throw ConfigError("generator: score_min must be < score_max");
  if (!(noise_std >= 0.0)) throw ConfigError("generator: noise_std must be >= 0");
  for (double d : difficulty_levels) {
    if (!(d > 0.0)) throw ConfigError("generator: difficulty levels must be positive");
  }
}

std::pair<double, double> GeneratorConfig::declared_score_range() const {
  if (!difficulty_mode()) return {score_min, score_max};
  const auto [lo, hi] = std::minmax_element(difficulty_levels.begin(), difficulty_levels.end());
  return {score_min * *lo, score_max * *hi};
}

const std::vector<ScoredVideo>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "'");
}

std::vector<CategoryModel> make_category_models(const GeneratorConfig& config) {
  config.validate();
  std::vector<CategoryModel> models(config.categories);
  for (std::size_t c = 0; c < config.categories; ++c) {
    Rng rng(mix_seed(mix_seed(config.seed, kCategoryStream), c));
    auto& m = models[c];
    for (std::size_t k = 0; k < config.phases; ++k) {
      m.phase_embedding.push_back(random_unit_vector(config.feature_dim, rng));
      m.quality_direction.push_back(random_unit_vector(config.feature_dim, rng));
    }
    std::uniform_real_distribution<double> w(0.5, 1.5);
    m.weights.resize(config.phases);
    for (auto& x : m.weights) x = w(rng);
    const double total = std::accumulate(m.weights.begin(), m.weights.end(), 0.0);
    for (auto& x : m.weights) x /= total;
  }
  return models;
}

double raw_score_from_quality(const GeneratorConfig& config, const CategoryModel& category,
                              std::span<const double> quality) {
  double q = 0.0;
  for (std::size_t k = 0; k < quality.size(); ++k) q += category.weights[k] * quality[k];
  q = std::clamp(q, 0.0, 1.0);
  return config.score_min + (config.score_max - config.score_min) * q;
}

std::vector<std::size_t> sample_phase_boundaries(std::size_t clips, std::size_t phases, Rng& rng) {
  if (phases == 0 || phases > clips) throw ConfigError("phase count must be in [1, clips]");
  // Choose phases-1 distinct cut points from {2, ..., clips}.
  std::vector<std::size_t> candidates(clips - 1);
  std::iota(candidates.begin(), candidates.end(), std::size_t{2});
  for (std::size_t i = 0; i + 1 < phases; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  std::vector<std::size_t> b(candidates.begin(),
                             candidates.begin() + static_cast<std::ptrdiff_t>(phases - 1));
  std::sort(b.begin(), b.end());
  b.insert(b.begin(), 1);
  b.push_back(clips + 1);
  return b;
}

ScoredVideo render_video(const GeneratorConfig& config, const CategoryModel& category,
                         std::size_t id, std::size_t category_id,
                         std::vector<std::size_t> boundaries, std::vector<double> quality,
                         std::optional<double> difficulty, Rng& rng) {
  const std::size_t T = config.clips, D = config.feature_dim;
  if (boundaries.size() != config.phases + 1 || boundaries.front() != 1 ||
      boundaries.back() != T + 1 || !std::is_sorted(boundaries.begin(), boundaries.end()) ||
      std::adjacent_find(boundaries.begin(), boundaries.end()) != boundaries.end()) {
    throw ConfigError("render_video: phase boundaries must increase strictly from 1 to T+1");
  }
  if (quality.size() != config.phases) throw ConfigError("render_video: one quality per phase");

  ScoredVideo v;
  v.id = id;
  v.category = category_id;
  v.clips.clips = T;
  v.clips.dim = D;
  v.clips.values.assign(T * D, 0.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t k = 0; k < config.phases; ++k) {
    const auto& e = category.phase_embedding[k];
    const auto& q = category.quality_direction[k];
    for (std::size_t t = boundaries[k]; t < boundaries[k + 1]; ++t) {
      double* row = v.clips.values.data() + (t - 1) * D;
      for (std::size_t j = 0; j < D; ++j) row[j] = e[j] + quality[k] * q[j];
    }
  }
  if (config.noise_std > 0.0) {
    for (auto& x : v.clips.values) x += config.noise_std * noise(rng);
  }
  v.raw_score = raw_score_from_quality(config, category, quality);
  v.difficulty = difficulty;
  v.score = difficulty ? v.raw_score * *difficulty : v.raw_score;
  v.phase_boundaries = std::move(boundaries);
  v.phase_quality = std::move(quality);
  return v;
}

Dataset generate_dataset(const GeneratorConfig& config) {
  config.validate();
  Dataset ds;
  ds.config = config;
  ds.categories = make_category_models(config);
  ds.train = generate_split(config, ds.categories, 0, config.num_train, kSplitStream[0]);
  ds.val = generate_split(config, ds.categories, config.num_train, config.num_val, kSplitStream[1]);
  ds.test = generate_split(config, ds.categories, config.num_train + config.num_val,
                           config.num_test, kSplitStream[2]);
  return ds;
}

// ---- pairing -----------------------------------------------------------------

bool eligible_exemplar(const ScoredVideo& test, const ScoredVideo& candidate, bool difficulty_mode) {
  if (candidate.id == test.id || candidate.category != test.category) return false;
  if (difficulty_mode) return candidate.difficulty == test.difficulty;
  return true;
}

double pair_delta(const ScoredVideo& test, const ScoredVideo& exemplar, bool difficulty_mode) {
  return difficulty_mode ? test.raw_score - exemplar.raw_score : test.score - exemplar.score;
}

TrainPair sample_exemplar(std::span<const ScoredVideo> pool, const ScoredVideo& test, Rng& rng,
                          bool difficulty_mode) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (eligible_exemplar(test, pool[i], difficulty_mode)) eligible.push_back(i);
  if (eligible.empty()) {
    throw SamplingError("no eligible exemplar for video " + std::to_string(test.id));
  }
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  const ScoredVideo& ex = pool[eligible[pick(rng)]];
  return {&test, &ex, pair_delta(test, ex, difficulty_mode)};
}

TrainPair sample_train_pair(std::span<const ScoredVideo> pool, Rng& rng, bool difficulty_mode) {
  if (pool.size() < 2) throw SamplingError("need at least two videos to form a pair");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return sample_exemplar(pool, pool[pick(rng)], rng, difficulty_mode);
}

ExemplarSelection select_inference_exemplars(std::span<const ScoredVideo> pool,
                                             const ScoredVideo& test, std::size_t count,
                                             std::uint64_t seed, bool difficulty_mode) {
  std::vector<const ScoredVideo*> eligible;
  for (const auto& v : pool)
    if (eligible_exemplar(test, v, difficulty_mode)) eligible.push_back(&v);
  ExemplarSelection sel;
  if (eligible.size() < count) {
    sel.warning = "video " + std::to_string(test.id) + ": only " +
                  std::to_string(eligible.size()) + " eligible exemplars, wanted " +
                  std::to_string(count);
    count = eligible.size();
  }
  Rng rng(mix_seed(seed, test.id));
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
    std::swap(eligible[i], eligible[pick(rng)]);
  }
  eligible.resize(count);
  sel.exemplars = std::move(eligible);
  return sel;
}

// ---- serialization -------------------------------------------------------------

std::string config_echo(const GeneratorConfig& c) {
  std::ostringstream os;
  os << "clips=" << c.clips << '\n'
     << "feature_dim=" << c.feature_dim << '\n'
     << "phases=" << c.phases << '\n'
     << "num_train=" << c.num_train << '\n'
     << "num_val=" << c.num_val << '\n'
     << "num_test=" << c.num_test << '\n'
     << "categories=" << c.categories << '\n'
     << "noise_std=" << text::format_double(c.noise_std) << '\n'
     << "score_min=" << text::format_double(c.score_min) << '\n'
     << "score_max=" << text::format_double(c.score_max) << '\n'
     << "difficulty_levels=" << (c.difficulty_mode() ? join(c.difficulty_levels) : "off") << '\n'
     << "seed=" << c.seed << '\n';
  return os.str();
}

bool set_generator_field(GeneratorConfig& c, const std::string& key, const std::string& value) {
  if (key == "clips") c.clips = text::parse_size(value, key);
  else if (key == "feature_dim") c.feature_dim = text::parse_size(value, key);
  else if (key == "phases") c.phases = text::parse_size(value, key);
  else if (key == "num_train") c.num_train = text::parse_size(value, key);
  else if (key == "num_val") c.num_val = text::parse_size(value, key);
  else if (key == "num_test") c.num_test = text::parse_size(value, key);
  else if (key == "categories") c.categories = text::parse_size(value, key);
  else if (key == "noise_std") c.noise_std = text::parse_double(value, key);
  else if (key == "score_min") c.score_min = text::parse_double(value, key);
  else if (key == "score_max") c.score_max = text::parse_double(value, key);
  else if (key == "difficulty_levels") {
    c.difficulty_levels.clear();
    if (value != "off" && !value.empty()) {
      for (const auto& tok : text::split(value, ',')) {
        c.difficulty_levels.push_back(text::parse_double(tok, key));
      }
    }
  } else if (key == "seed") c.seed = text::parse_u64(value, key);
  else return false;
  return true;
}

void write_split(const std::filesystem::path& path, const GeneratorConfig& config,
                 const std::string& split_name, std::span<const ScoredVideo> videos) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  os << "# tpt synthetic split v1\n";
  os << "split=" << split_name << '\n';
  os << config_echo(config);
  os << "videos=" << videos.size() << '\n';
  os << "end_header\n";
  for (const auto& v : videos) {
    os << "video id=" << v.id << " category=" << v.category
       << " score=" << text::format_double(v.score)
       << " raw_score=" << text::format_double(v.raw_score)
       << " difficulty=" << (v.difficulty ? text::format_double(*v.difficulty) : "none")
       << " boundaries=" << join(v.phase_boundaries) << " quality=" << join(v.phase_quality)
       << '\n';
    for (std::size_t t = 0; t < v.clips.clips; ++t) {
      auto row = v.clips.row(t);
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) os << ' ';
        os << text::format_double(row[j]);
      }
      os << '\n';
    }
  }
  if (!os) throw ConfigError("write to '" + path.string() + "' failed");
}

SplitFile read_split(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open '" + path.string() + "'");
  SplitFile sf;
  std::string line;
  std::getline(is, line);
  if (line != "# tpt synthetic split v1") throw LoadError("'" + path.string() + "': bad header");
  std::size_t expected = 0;
  while (std::getline(is, line) && line != "end_header") {
    auto [key, value] = text::split_kv(line);
    if (key == "split") sf.split_name = value;
    else if (key == "videos") expected = text::parse_size(value, key);
    else if (!set_generator_field(sf.config, key, value)) {
      throw LoadError("'" + path.string() + "': unknown header key '" + key + "'");
    }
  }
  const std::size_t T = sf.config.clips, D = sf.config.feature_dim;
  for (std::size_t n = 0; n < expected; ++n) {
    if (!std::getline(is, line) || line.rfind("video ", 0) != 0) {
      throw LoadError("'" + path.string() + "': truncated video record");
    }
    ScoredVideo v;
    std::istringstream rec(line.substr(6));
    std::string field;
    while (rec >> field) {
      auto [key, value] = text::split_kv(field);
      if (key == "id") v.id = text::parse_size(value, key);
      else if (key == "category") v.category = text::parse_size(value, key);
      else if (key == "score") v.score = text::parse_double(value, key);
      else if (key == "raw_score") v.raw_score = text::parse_double(value, key);
      else if (key == "difficulty") {
        if (value != "none") v.difficulty = text::parse_double(value, key);
      } else if (key == "boundaries") {
        for (const auto& tok : text::split(value, ',')) v.phase_boundaries.push_back(text::parse_size(tok, key));
      } else if (key == "quality") {
        for (const auto& tok : text::split(value, ',')) v.phase_quality.push_back(text::parse_double(tok, key));
      }
    }
    v.clips.clips = T;
    v.clips.dim = D;
    v.clips.values.reserve(T * D);
    for (std::size_t t = 0; t < T; ++t) {
      if (!std::getline(is, line)) throw LoadError("'" + path.string() + "': truncated clip rows");
      std::istringstream row(line);
      std::string tok;
      std::size_t count = 0;
      while (row >> tok) {
        v.clips.values.push_back(text::parse_double(tok, "clip value"));
        ++count;
      }
      if (count != D) throw LoadError("'" + path.string() + "': clip row has wrong width");
    }
    sf.videos.push_back(std::move(v));
  }
  return sf;
}

void write_manifest_csv(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  os << "video_id,split,category,score,difficulty,phase_boundaries\n";
  auto emit = [&](const std::vector<ScoredVideo>& vs, const char* split) {
    for (const auto& v : vs) {
      os << v.id << ',' << split << ',' << v.category << ',' << text::format_double(v.score) << ','
         << (v.difficulty ? text::format_double(*v.difficulty) : "") << ','
         << join(v.phase_boundaries, ' ') << '\n';
    }
  };
  emit(dataset.train, "train");
  emit(dataset.val, "val");
  emit(dataset.test, "test");
}

}  // namespace tpt::data
