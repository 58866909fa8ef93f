// tpt_cli: command-line driver.
//
//   tpt_cli gen-data  --config run.cfg --out data/
//   tpt_cli train     --config run.cfg --set train.epochs=10
//   tpt_cli eval      --checkpoint runs/<id>/checkpoint.bin --split test
//   tpt_cli ablate    --config run.cfg --variants baseline,tpt --out table.csv
//   tpt_cli gradcheck
//   tpt_cli export-attention --checkpoint ... --split test --count 4 --out maps/

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "tpt/config.hpp"
#include "tpt/errors.hpp"
#include "tpt/harness.hpp"
#include "tpt/synthetic.hpp"
#include "tpt/text.hpp"

namespace {

using tpt::RunConfig;

RunConfig build_config(const std::string& path, const std::vector<std::string>& overrides,
                       RunConfig start = {}) {
  RunConfig c = path.empty() ? start : RunConfig::from_file(path);
  for (const auto& s : overrides) c.set_assignment(s);
  c.finalize();
  return c;
}

tpt::data::Dataset load_dataset(const std::string& dir, RunConfig& config) {
  if (dir.empty()) return tpt::data::generate_dataset(config.data);
  tpt::data::Dataset ds;
  const std::filesystem::path root(dir);
  auto train = tpt::data::read_split(root / "train.txt");
  ds.config = train.config;
  ds.train = std::move(train.videos);
  ds.val = tpt::data::read_split(root / "val.txt").videos;
  ds.test = tpt::data::read_split(root / "test.txt").videos;
  config.data = ds.config;
  config.finalize();
  return ds;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw tpt::ConfigError("cannot write '" + path.string() + "'");
  os << body;
}

void print_warnings(const tpt::EvalResult& ev) {
  for (const auto& w : ev.warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal parsing transformer for action quality assessment"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out, checkpoint, split = "test", variants = "all";
  std::vector<std::string> overrides;
  std::size_t count = 4, cell = 8;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value run configuration file");
    sub->add_option("--set", overrides, "override one key, e.g. --set model.d=64");
  };

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  add_config(gen);
  gen->add_option("--out", out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a model and write a run directory");
  add_config(train);
  train->add_option("--data-dir", data_dir, "read splits written by gen-data");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--data-dir", data_dir);
  eval->add_option("--set", overrides, "eval.* or seed overrides");
  eval->add_option("--out", out, "write the report JSON here");

  auto* abl = app.add_subcommand("ablate", "train every variant and tabulate test metrics");
  add_config(abl);
  abl->add_option("--data-dir", data_dir);
  abl->add_option("--variants", variants, "comma-separated list, or 'all'");
  abl->add_option("--out", out, "CSV output path");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_config(grad);

  auto* exp = app.add_subcommand("export-attention", "dump cross-attention maps");
  exp->add_option("--checkpoint", checkpoint)->required();
  exp->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));
  exp->add_option("--data-dir", data_dir);
  exp->add_option("--count", count, "number of videos");
  exp->add_option("--cell", cell, "PGM pixels per cell");
  exp->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      auto config = build_config(config_path, overrides);
      const auto ds = tpt::data::generate_dataset(config.data);
      const std::filesystem::path root(out);
      std::filesystem::create_directories(root);
      tpt::data::write_split(root / "train.txt", ds.config, "train", ds.train);
      tpt::data::write_split(root / "val.txt", ds.config, "val", ds.val);
      tpt::data::write_split(root / "test.txt", ds.config, "test", ds.test);
      tpt::data::write_manifest_csv(root / "manifest.csv", ds);
      std::cout << "wrote " << ds.train.size() << '/' << ds.val.size() << '/' << ds.test.size()
                << " videos to " << root.string() << '\n';
    } else if (*train) {
      auto config = build_config(config_path, overrides);
      const auto ds = load_dataset(data_dir, config);
      const auto result = tpt::train(config, ds, {true, &std::cout});
      std::cout << "best epoch " << result.best_epoch << "\nrun directory "
                << result.run_dir.string() << '\n';
    } else if (*eval) {
      auto tm = tpt::load_checkpoint(checkpoint);
      for (const auto& s : overrides) {
        const auto [k, v] = tpt::text::split_kv(s);
        if (k != "seed" && k.rfind("eval.", 0) != 0) {
          throw tpt::ConfigError("eval only accepts seed and eval.* overrides, got '" + k + "'");
        }
        tm.config.set(k, v);
      }
      const auto ds = load_dataset(data_dir, tm.config);
      const auto ev = tpt::evaluate(tm, ds.train, ds.split(split), split);
      print_warnings(ev);
      const auto json = ev.report.to_json();
      std::cout << json << '\n';
      if (!out.empty()) write_file(out, json + "\n");
    } else if (*abl) {
      auto config = build_config(config_path, overrides);
      const auto ds = load_dataset(data_dir, config);
      std::vector<std::string> names;
      if (variants == "all") {
        names = tpt::ablation_variants();
      } else {
        for (auto& v : tpt::text::split(variants, ','))
          if (!tpt::text::trim(v).empty()) names.push_back(std::string(tpt::text::trim(v)));
      }
      const auto rows = tpt::ablate(config, ds, names, &std::cerr);
      const auto csv = tpt::ablation_csv(rows);
      std::cout << csv;
      if (!out.empty()) write_file(out, csv);
    } else if (*grad) {
      const auto config = build_config(config_path, overrides, tpt::tiny_config());
      const auto report = tpt::gradcheck(config);
      std::cout << report.to_text();
      return report.passed() ? 0 : 1;
    } else if (*exp) {
      const auto tm = tpt::load_checkpoint(checkpoint);
      auto config = tm.config;
      const auto ds = load_dataset(data_dir, config);
      const auto& videos = ds.split(split);
      const std::size_t n = std::min(count, videos.size());
      const auto files = tpt::export_attention(
          tm, std::span<const tpt::data::ScoredVideo>(videos).first(n), out, cell);
      std::cout << "wrote " << files.size() << " files to " << out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
