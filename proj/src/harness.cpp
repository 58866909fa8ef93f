#include "tpt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "tpt/checkpoint.hpp"
#include "tpt/errors.hpp"
#include "tpt/optim.hpp"
#include "tpt/text.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tpt {

namespace {

constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kEvalStream = 3;
constexpr std::uint64_t kGradcheckStream = 4;

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << body;
}

std::string describe(const LossLog& l) {
  std::ostringstream os;
  os << "total=" << text::format_double(l.total) << " cls=" << text::format_double(l.cls)
     << " reg=" << text::format_double(l.reg) << " order=" << text::format_double(l.order)
     << " sparsity=" << text::format_double(l.sparsity);
  return os.str();
}

bool finite(const LossLog& l) {
  return std::isfinite(l.total) && std::isfinite(l.cls) && std::isfinite(l.reg) &&
         std::isfinite(l.order) && std::isfinite(l.sparsity);
}

std::vector<std::vector<double>> snapshot(const ad::ParameterStore& store) {
  std::vector<std::vector<double>> out;
  for (const auto* p : store.all()) out.emplace_back(p->values().begin(), p->values().end());
  return out;
}

void restore(ad::ParameterStore& store, const std::vector<std::vector<double>>& values) {
  const auto& ps = store.all();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    std::copy(values[i].begin(), values[i].end(), ps[i]->values().begin());
  }
}

// Runs body(i) for i in [0, n) across threads and rethrows the first failure.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (n > 1)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(tpt_parallel_for_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

regress::GroupIntervals training_intervals(std::span<const data::ScoredVideo> train,
                                           std::size_t groups, bool difficulty_mode) {
  std::vector<double> deltas;
  for (const auto& a : train)
    for (const auto& b : train)
      if (data::eligible_exemplar(a, b, difficulty_mode))
        deltas.push_back(data::pair_delta(a, b, difficulty_mode));
  return regress::GroupIntervals::from_deltas(std::move(deltas), groups);
}

TrainedModel init_model(const RunConfig& config, const data::Dataset& dataset) {
  TrainedModel tm;
  tm.config = config;
  tm.config.finalize();
  tm.model = std::make_unique<model::AqaModel>(tm.config.model, mix_seed(config.seed, kModelStream));
  tm.intervals = training_intervals(dataset.train, tm.config.model.groups,
                                    tm.config.data.difficulty_mode());
  return tm;
}

BatchLoss batch_objective(ad::Tape& tape, const TrainedModel& tm,
                          std::span<const data::TrainPair> pairs) {
  if (pairs.empty()) throw ContractError("batch_objective: empty batch");
  const double inv = 1.0 / static_cast<double>(pairs.size());
  BatchLoss out;
  std::vector<ad::Tensor> totals;
  for (const auto& pair : pairs) {
    const auto test = tm.model->parts(tape, pair.test->clips);
    const auto ex = tm.model->parts(tape, pair.exemplar->clips);
    const auto terms = model::pair_objective(tape, *tm.model, test, ex,
                                             tm.intervals.encode(pair.delta), tm.config.objective);
    totals.push_back(terms.total);
    out.log.cls += terms.cls.item() * inv;
    out.log.reg += terms.reg.item() * inv;
    out.log.order += terms.order.item() * inv;
    out.log.sparsity += terms.sparsity.item() * inv;
  }
  out.total = ad::scale(ad::sum(ad::concat(totals, 0)), inv);
  out.log.total = out.total.item();
  return out;
}

// ---- evaluation ---------------------------------------------------------------------

EvalResult evaluate_with(const RunConfig& config, std::span<const data::ScoredVideo> pool,
                         std::span<const data::ScoredVideo> videos, const std::string& split,
                         const PairPredictor& predict) {
  const bool dm = config.data.difficulty_mode();
  const auto [s_min, s_max] = config.data.declared_score_range();
  const std::uint64_t seed = mix_seed(config.seed, kEvalStream);
  const std::size_t n = videos.size();
  EvalResult result;
  result.predictions.assign(n, 0.0);
  std::vector<std::string> warnings(n);
  parallel_for(n, [&](std::size_t i) {
    const auto sel = data::select_inference_exemplars(pool, videos[i], config.exemplars, seed, dm);
    if (sel.exemplars.empty()) {
      throw SamplingError("no eligible exemplar for video " + std::to_string(videos[i].id));
    }
    warnings[i] = sel.warning;
    const auto preds = predict(videos[i], sel.exemplars);
    result.predictions[i] = regress::fuse_predictions(preds, config.exemplar_fusion);
  });
  for (auto& w : warnings)
    if (!w.empty()) result.warnings.push_back(std::move(w));

  std::vector<double> truth;
  truth.reserve(n);
  for (const auto& v : videos) truth.push_back(v.score);
  if (n >= 2) {
    try {
      result.report = metrics::make_report(result.predictions, truth, s_min, s_max);
    } catch (const DomainError& e) {
      // Constant predictions leave the rank correlation undefined; report 0.
      result.report.spearman = 0.0;
      result.report.relative_l2 = metrics::relative_l2(result.predictions, truth, s_min, s_max);
      result.report.count = n;
      result.report.s_min = s_min;
      result.report.s_max = s_max;
      result.warnings.push_back(std::string(split) + ": " + e.what());
    }
  } else {
    result.report.count = n;
    result.report.s_min = s_min;
    result.report.s_max = s_max;
    if (n == 1) {
      result.report.relative_l2 = metrics::relative_l2(result.predictions, truth, s_min, s_max);
    }
  }
  result.report.split = split;
  result.report.config_hash = config.hash();
  return result;
}

EvalResult evaluate(const TrainedModel& tm, std::span<const data::ScoredVideo> pool,
                    std::span<const data::ScoredVideo> videos, const std::string& split) {
  const auto& model = *tm.model;
  const bool dm = tm.config.data.difficulty_mode();

  // Exemplar part sets are decoded once and reused across test videos.
  std::vector<ad::Shape> shapes(pool.size());
  std::vector<std::vector<double>> cache(pool.size());
  parallel_for(pool.size(), [&](std::size_t i) {
    ad::Tape tape(false);
    const auto ps = model.parts(tape, pool[i].clips);
    shapes[i] = ps.parts.shape();
    cache[i] = ps.parts.to_vector();
  });

  const PairPredictor predict = [&](const data::ScoredVideo& test,
                                    std::span<const data::ScoredVideo* const> exemplars) {
    ad::Tape tape(false);
    const auto test_parts = model.parts(tape, test.clips);
    std::vector<double> preds;
    preds.reserve(exemplars.size());
    for (const auto* ex : exemplars) {
      const auto idx = static_cast<std::size_t>(ex - pool.data());
      model::PartSet ex_parts{tape.constant(shapes.at(idx), cache.at(idx)), {}, {}};
      const auto out = model.regress(tape, test_parts, ex_parts);
      const double s0 = dm ? ex->raw_score : ex->score;
      preds.push_back(regress::decode_score(out.probabilities.values(), out.gammas.values(),
                                            tm.intervals, s0,
                                            dm ? test.difficulty : std::optional<double>{}));
    }
    return preds;
  };
  return evaluate_with(tm.config, pool, videos, split, predict);
}

// ---- checkpoints -----------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& tm) {
  ckpt::Archive archive;
  archive.metadata = "# config_hash=" + tm.config.hash() + "\n" + tm.config.to_text();
  ckpt::append_parameters(archive, tm.model->params());
  const auto& edges = tm.intervals.edges();
  const auto& counts = tm.intervals.counts();
  archive.entries.push_back({"intervals.edges", {edges.size()}, edges});
  archive.entries.push_back(
      {"intervals.counts", {counts.size()}, std::vector<double>(counts.begin(), counts.end())});
  ckpt::write_archive(path, archive);
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  const auto archive = ckpt::read_archive(path);
  TrainedModel tm;
  try {
    tm.config = RunConfig::from_text(archive.metadata);
    tm.config.finalize();
  } catch (const ConfigError& e) {
    throw LoadError("checkpoint '" + path.string() + "': bad config: " + e.what());
  }
  const std::string tag = "# config_hash=";
  if (archive.metadata.rfind(tag, 0) == 0) {
    const auto stored = archive.metadata.substr(tag.size(), archive.metadata.find('\n') - tag.size());
    if (stored != tm.config.hash()) {
      throw LoadError("checkpoint '" + path.string() + "': config hash " + stored +
                      " does not match its config (" + tm.config.hash() + ")");
    }
  }
  tm.model = std::make_unique<model::AqaModel>(tm.config.model, mix_seed(tm.config.seed, kModelStream));
  ckpt::load_parameters(archive, tm.model->params());
  const auto* edges = archive.find("intervals.edges");
  const auto* counts = archive.find("intervals.counts");
  if (!edges || !counts) throw LoadError("checkpoint '" + path.string() + "': no intervals");
  if (edges->values.size() != tm.config.model.groups + 1 ||
      counts->values.size() != tm.config.model.groups) {
    throw LoadError("checkpoint '" + path.string() + "': interval count differs from B");
  }
  std::vector<std::size_t> c;
  for (double v : counts->values) c.push_back(static_cast<std::size_t>(v));
  tm.intervals = regress::GroupIntervals(edges->values, std::move(c));
  return tm;
}

std::filesystem::path make_run_dir(const RunConfig& config) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm local{};
  localtime_r(&now, &local);
  std::ostringstream stamp;
  stamp << std::put_time(&local, "%Y%m%d-%H%M%S");
  const auto base = std::filesystem::path(config.output_dir) / (config.hash() + "-" + stamp.str());
  auto dir = base;
  for (int k = 1; std::filesystem::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
  std::filesystem::create_directories(dir);
  return dir;
}

// ---- training ----------------------------------------------------------------------------

TrainResult train(const RunConfig& config, const data::Dataset& dataset,
                  const TrainOptions& options) {
  TrainResult result;
  result.trained = init_model(config, dataset);
  auto& tm = result.trained;
  const auto& cfg = tm.config;
  const bool dm = cfg.data.difficulty_mode();
  const std::string hash = cfg.hash();
  std::ostream* log = options.log;

  auto& store = tm.model->params();
  optim::Adam adam(store, {cfg.optim.lr_backbone, cfg.optim.beta1, cfg.optim.beta2, cfg.optim.eps},
                   {{"backbone", cfg.optim.lr_backbone}, {"head", cfg.optim.lr_head}});
  Rng rng(mix_seed(cfg.seed, kTrainStream));

  if (options.write_artifacts) {
    result.run_dir = make_run_dir(cfg);
    write_text(result.run_dir / "config.txt", "# config_hash=" + hash + "\n" + cfg.to_text());
    write_text(result.run_dir / "intervals.csv",
               "# config_hash=" + hash + "\n" + tm.intervals.to_csv());
  }
  std::ofstream loss_csv;
  if (options.write_artifacts) {
    loss_csv.open(result.run_dir / "train_loss.csv");
    loss_csv << "config_hash,epoch,total,cls,reg,order,sparsity\n";
  }

  const auto& train_set = dataset.train;
  std::vector<std::size_t> order(train_set.size());
  std::vector<std::vector<double>> best_values;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog elog;
    elog.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<data::TrainPair> pairs;
      for (std::size_t b = start; b < stop; ++b) {
        pairs.push_back(data::sample_exemplar(train_set, train_set[order[b]], rng, dm));
      }
      ad::Tape tape;
      const auto loss = batch_objective(tape, tm, pairs);
      if (!finite(loss.log)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(step) + ": " + describe(loss.log));
      }
      if (step == 0) result.first_batch = loss.log;
      store.zero_grad();
      tape.backward(loss.total);
      adam.step();
      ++step;
      ++batches;
      elog.loss.total += loss.log.total;
      elog.loss.cls += loss.log.cls;
      elog.loss.reg += loss.log.reg;
      elog.loss.order += loss.log.order;
      elog.loss.sparsity += loss.log.sparsity;
    }
    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      elog.loss.total *= inv;
      elog.loss.cls *= inv;
      elog.loss.reg *= inv;
      elog.loss.order *= inv;
      elog.loss.sparsity *= inv;
    }

    double score = static_cast<double>(epoch);  // without validation, keep the last epoch
    if (!dataset.val.empty()) {
      auto ev = evaluate(tm, train_set, dataset.val, "val");
      ev.report.epoch = static_cast<int>(epoch);
      elog.val = ev.report;
      score = ev.report.spearman;
      if (options.write_artifacts) metrics::append_history(result.run_dir / "history.csv", ev.report);
    }
    if (score > best_score) {
      best_score = score;
      best_values = snapshot(store);
      result.best_epoch = epoch;
      result.best_val = elog.val;
    }
    if (log) {
      *log << "epoch " << epoch << ' ' << describe(elog.loss);
      if (!dataset.val.empty()) {
        *log << " val_spearman=" << text::format_fixed(elog.val.spearman, 4)
             << " val_rl2x100=" << text::format_fixed(100.0 * elog.val.relative_l2, 4);
      }
      *log << '\n';
    }
    if (loss_csv.is_open()) {
      loss_csv << hash << ',' << epoch << ',' << text::format_double(elog.loss.total) << ','
               << text::format_double(elog.loss.cls) << ',' << text::format_double(elog.loss.reg)
               << ',' << text::format_double(elog.loss.order) << ','
               << text::format_double(elog.loss.sparsity) << '\n';
    }
    result.history.push_back(elog);
  }
  if (!best_values.empty()) restore(store, best_values);

  if (options.write_artifacts) {
    save_checkpoint(result.run_dir / "checkpoint.bin", tm);
    if (!dataset.val.empty()) write_text(result.run_dir / "best_val.json", result.best_val.to_json());
    if (!dataset.test.empty()) {
      auto ev = evaluate(tm, train_set, dataset.test, "test");
      ev.report.epoch = static_cast<int>(result.best_epoch);
      write_text(result.run_dir / "test.json", ev.report.to_json());
      metrics::append_history(result.run_dir / "history.csv", ev.report);
    }
  }
  return result;
}

// ---- ablation ------------------------------------------------------------------------------

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> names = {
      "baseline",          "adaptive_pooling", "temporal_conv", "tpt_no_losses",
      "tpt_rank_only",     "tpt_sparsity_only", "tpt",          "tpt_diversity",
      "pe_memory",         "pe_memory_query",  "fusion_holistic"};
  return names;
}

RunConfig variant_config(const RunConfig& base, const std::string& variant) {
  RunConfig c = base;
  auto& w = c.objective.weights;
  if (variant == "baseline") {
    c.model.generator = model::PartGenerator::baseline;
  } else if (variant == "adaptive_pooling") {
    c.model.generator = model::PartGenerator::adaptive_pool;
  } else if (variant == "temporal_conv") {
    c.model.generator = model::PartGenerator::temporal_conv;
  } else if (variant == "tpt_no_losses") {
    w.rank = 0.0;
    w.sparsity = 0.0;
  } else if (variant == "tpt_rank_only") {
    w.sparsity = 0.0;
  } else if (variant == "tpt_sparsity_only") {
    w.rank = 0.0;
  } else if (variant == "tpt") {
  } else if (variant == "tpt_diversity") {
    c.objective.attention.order = losses::OrderLoss::diversity;
  } else if (variant == "pe_memory") {
    c.model.tpt.positional = model::PositionalMode::memory;
  } else if (variant == "pe_memory_query") {
    c.model.tpt.positional = model::PositionalMode::memory_query;
  } else if (variant == "fusion_holistic") {
    c.model.fusion = regress::FusionMode::part_enhanced_holistic;
  } else {
    throw ConfigError("unknown ablation variant '" + variant + "'");
  }
  if (c.model.generator != model::PartGenerator::tpt) {
    w.rank = 0.0;
    w.sparsity = 0.0;
  }
  c.finalize();
  return c;
}

std::vector<AblationRow> ablate(const RunConfig& base, const data::Dataset& dataset,
                                std::span<const std::string> variants, std::ostream* log) {
  std::vector<RunConfig> configs;
  for (const auto& v : variants) configs.push_back(variant_config(base, v));
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    if (log) *log << "variant " << variants[i] << '\n';
    auto run = train(configs[i], dataset, {false, log});
    const auto ev = evaluate(run.trained, dataset.train, dataset.test, "test");
    rows.push_back({variants[i], ev.report.spearman, ev.report.relative_l2});
  }
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::ostringstream os;
  os << "variant,spearman,relative_l2_x100\n";
  for (const auto& r : rows) {
    os << r.variant << ',' << text::format_fixed(r.spearman, 4) << ','
       << text::format_fixed(100.0 * r.relative_l2, 4) << '\n';
  }
  return os.str();
}

// ---- gradient check -------------------------------------------------------------------------

std::string GradcheckReport::to_text() const {
  std::ostringstream os;
  os << std::left;
  for (const auto& e : entries) {
    os << std::setw(36) << e.name << ' ' << std::setw(6) << e.size << ' '
       << std::scientific << std::setprecision(3) << e.max_rel_error << '\n';
  }
  os << "max_rel_error " << std::scientific << std::setprecision(3) << max_rel_error
     << (passed() ? " PASS" : " FAIL") << '\n';
  return os.str();
}

GradcheckReport gradcheck(const RunConfig& config) {
  constexpr double h = 1e-5;
  constexpr double floor = 1e-5;
  RunConfig cfg = config;
  cfg.finalize();
  const auto dataset = data::generate_dataset(cfg.data);
  auto tm = init_model(cfg, dataset);
  auto& store = tm.model->params();

  // Move away from the zero-initialized heads so every gradient path is live.
  Rng rng(mix_seed(cfg.seed, kGradcheckStream));
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (auto* p : store.all())
    for (double& v : p->values()) v += jitter(rng);

  std::vector<data::TrainPair> pairs;
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    pairs.push_back(data::sample_train_pair(dataset.train, rng, cfg.data.difficulty_mode()));
  }
  const auto loss_at = [&] {
    ad::Tape tape(false);
    return batch_objective(tape, tm, pairs).total.item();
  };

  {
    ad::Tape tape;
    const auto loss = batch_objective(tape, tm, pairs);
    store.zero_grad();
    tape.backward(loss.total);
  }

  GradcheckReport report;
  for (auto* p : store.all()) {
    GradcheckEntry e{p->name(), p->size(), 0.0};
    auto values = p->values();
    const std::vector<double> analytic(p->grad().begin(), p->grad().end());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      values[i] = keep + h;
      const double up = loss_at();
      values[i] = keep - h;
      const double down = loss_at();
      values[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double a = i < analytic.size() ? analytic[i] : 0.0;
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      e.max_rel_error = std::max(e.max_rel_error, err);
    }
    report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
    report.entries.push_back(std::move(e));
  }
  return report;
}

// ---- attention export ---------------------------------------------------------------------------

std::string attention_csv(std::span<const double> att, std::size_t rows, std::size_t cols) {
  if (att.size() != rows * cols) throw DimensionError("attention_csv: size mismatch");
  std::ostringstream os;
  os << "query";
  for (std::size_t t = 1; t <= cols; ++t) os << ",clip" << t;
  os << '\n';
  for (std::size_t k = 0; k < rows; ++k) {
    os << k + 1;
    for (std::size_t t = 0; t < cols; ++t) os << ',' << text::format_fixed(att[k * cols + t], 9);
    os << '\n';
  }
  return os.str();
}

std::string attention_pgm(std::span<const double> att, std::size_t rows, std::size_t cols,
                          std::size_t cell) {
  if (att.size() != rows * cols) throw DimensionError("attention_pgm: size mismatch");
  if (cell == 0) throw ConfigError("attention_pgm: cell size must be >= 1");
  const double peak = att.empty() ? 0.0 : *std::max_element(att.begin(), att.end());
  const std::size_t w = cols * cell, hgt = rows * cell;
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(hgt) + "\n255\n";
  out.reserve(out.size() + w * hgt);
  for (std::size_t y = 0; y < hgt; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = peak > 0.0 ? att[(y / cell) * cols + x / cell] / peak : 0.0;
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
  }
  return out;
}

std::vector<std::filesystem::path> export_attention(const TrainedModel& tm,
                                                    std::span<const data::ScoredVideo> videos,
                                                    const std::filesystem::path& dir,
                                                    std::size_t cell_pixels) {
  if (tm.config.model.generator != model::PartGenerator::tpt) {
    throw ConfigError("export-attention needs the tpt part generator");
  }
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const std::string hash = tm.config.hash();
  for (const auto& v : videos) {
    ad::Tape tape(false);
    const auto ps = tm.model->parts(tape, v.clips);
    for (std::size_t layer = 0; layer < ps.attention.size(); ++layer) {
      const auto& a = ps.attention[layer];
      const std::string stem =
          "video" + std::to_string(v.id) + "_layer" + std::to_string(layer + 1);
      const auto csv = dir / (stem + ".csv");
      const auto pgm = dir / (stem + ".pgm");
      write_text(csv, attention_csv(a.values(), a.rows(), a.cols()));
      std::string image = attention_pgm(a.values(), a.rows(), a.cols(), cell_pixels);
      image.insert(3, "# config_hash=" + hash + "\n");
      write_text(pgm, image);
      written.push_back(csv);
      written.push_back(pgm);
    }
  }
  return written;
}

}  // namespace tpt
