#include "lml/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lml/checkpoint.hpp"
#include "lml/config.hpp"
#include "lml/errors.hpp"
#include "lml/experiment.hpp"
#include "lml/metrics.hpp"
#include "lml/mpem.hpp"
#include "lml/plot.hpp"
#include "lml/train.hpp"

namespace fs = std::filesystem;

namespace lml {

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "override the config seed");
}

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) cfg.set_seed(*c.seed);
  cfg.validate();
  return cfg;
}

fs::path out_dir(const Common& c) {
  fs::path dir = c.out.empty() ? default_output_dir() : fs::path(c.out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

// Appends rows, writing the header first when the file is new or empty.
void append_csv(const fs::path& path, const std::vector<std::string>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot write " + path.string());
  if (fresh) out << metrics::csv_header() << '\n';
  for (const auto& r : rows) out << r << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

// Dataset from --data when given, otherwise generated from the config.
Dataset obtain_dataset(ExperimentConfig& cfg, const std::string& data) {
  if (data.empty()) return make_dataset(cfg.data);
  Dataset ds = load_dataset(data);
  const auto seed = cfg.data.seed;
  cfg.data = ds.config;
  cfg.data.seed = seed;
  cfg.validate();
  return ds;
}

const std::vector<Bag>& pick_split(const Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "validation") return ds.validation;
  if (split == "test") return ds.test;
  throw ConfigError("unknown split '" + split + "' (expected train, validation or test)");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Learning from majority label: counting network experiments"};
  app.require_subcommand(1);

  Common gen_c, train_c, mpem_c, eval_c, sweep_c;
  std::string train_data, train_method, mpem_data, eval_ckpt, eval_data, eval_split = "test";
  std::optional<int> sweep_jobs;
  std::string plot_csv, plot_out, plot_metric = "instance_accuracy";

  auto* gen = app.add_subcommand("generate", "write a dataset file from a config");
  add_common(gen, gen_c);
  gen->add_option("--out", gen_c.out, "dataset file (default: <out dir>/dataset.json)");

  auto* tr = app.add_subcommand("train", "train one method");
  add_common(tr, train_c);
  tr->add_option("--data", train_data, "dataset file")->check(CLI::ExistingFile);
  tr->add_option("--method", train_method, "override the config method");
  tr->add_option("--out", train_c.out, "output directory");

  auto* mp = app.add_subcommand("mpem", "pre-train, remove instances, retrain over the r grid");
  add_common(mp, mpem_c);
  mp->add_option("--data", mpem_data, "dataset file")->check(CLI::ExistingFile);
  mp->add_option("--out", mpem_c.out, "output directory");

  auto* ev = app.add_subcommand("evaluate", "metrics of a checkpoint on a dataset split");
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", eval_data, "dataset file")->required()->check(CLI::ExistingFile);
  ev->add_option("--split", eval_split, "train, validation or test");
  ev->add_option("--out", eval_c.out, "metrics JSON file (default: stdout)");

  auto* sw = app.add_subcommand("sweep", "scenario x method grid");
  add_common(sw, sweep_c);
  sw->add_option("--jobs", sweep_jobs, "worker threads (0 = all cores)");
  sw->add_option("--out", sweep_c.out, "results CSV (default: <out dir>/sweep.csv)");

  auto* pl = app.add_subcommand("plot", "render an SVG chart from a results CSV");
  pl->add_option("--csv", plot_csv, "results CSV")->required()->check(CLI::ExistingFile);
  pl->add_option("--metric", plot_metric, "column to plot");
  pl->add_option("--out", plot_out, "SVG file (default: CSV path with .svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      ExperimentConfig cfg = resolve_config(gen_c);
      const fs::path path = gen_c.out.empty() ? default_output_dir() / "dataset.json" : fs::path(gen_c.out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      save_dataset(make_dataset(cfg.data), path);
      std::cout << path.string() << '\n';
    } else if (*tr) {
      ExperimentConfig cfg = resolve_config(train_c);
      if (!train_method.empty()) cfg.method = parse_method(train_method);
      if (cfg.method == Method::CountingMpem) throw ConfigError("use the mpem subcommand for counting+mpem");
      const Dataset ds = obtain_dataset(cfg, train_data);
      const fs::path dir = out_dir(train_c);
      auto result = train(cfg, ds);
      const fs::path ckpt = dir / "model.ckpt";
      save_checkpoint(result.model, ckpt, {{"best_epoch", result.record.best_epoch}});
      result.record.checkpoint_path = ckpt.string();
      write_text(dir / "run_record.json", to_json(result.record).dump(2) + "\n");
      if (result.record.metrics) append_csv(dir / "results.csv", {metrics::csv_row(*result.record.metrics)});
      std::cout << (dir / "run_record.json").string() << '\n';
    } else if (*mp) {
      ExperimentConfig cfg = resolve_config(mpem_c);
      cfg.method = Method::CountingMpem;
      const Dataset ds = obtain_dataset(cfg, mpem_data);
      const fs::path dir = out_dir(mpem_c);
      auto result = mpem::run_pipeline(cfg, ds);
      const fs::path ckpt = dir / "model.ckpt";
      save_checkpoint(result.model, ckpt, {{"selected_r", result.report.selected_r}});
      result.report.selected.checkpoint_path = ckpt.string();
      write_text(dir / "mpem_report.json", mpem::to_json(result.report).dump(2) + "\n");
      write_text(dir / "run_record.json", to_json(result.report.selected).dump(2) + "\n");
      append_csv(dir / "mpem.csv", mpem::csv_rows(result.report));
      std::cout << (dir / "mpem.csv").string() << '\n';
    } else if (*ev) {
      const Model model = load_checkpoint(eval_ckpt);
      const Dataset ds = load_dataset(eval_data);
      metrics::Metadata meta;
      meta.method = to_string(model.spec().method);
      meta.scenario = to_string(ds.config.scenario);
      meta.seed = model.spec().seed;
      const auto report = metrics::evaluate(model, pick_split(ds, eval_split), meta);
      const std::string text = metrics::to_json(report).dump(2) + "\n";
      if (eval_c.out.empty()) {
        std::cout << text;
      } else {
        write_text(eval_c.out, text);
      }
    } else if (*sw) {
      ExperimentConfig cfg = resolve_config(sweep_c);
      if (sweep_jobs) cfg.jobs = *sweep_jobs;
      const fs::path path = sweep_c.out.empty() ? default_output_dir() / "sweep.csv" : fs::path(sweep_c.out);
      std::vector<std::string> rows;
      for (const auto& r : sweep(cfg)) rows.push_back(metrics::csv_row(r));
      append_csv(path, rows);
      std::cout << path.string() << '\n';
    } else if (*pl) {
      const fs::path out = plot_out.empty() ? fs::path(plot_csv).replace_extension(".svg") : fs::path(plot_out);
      write_text(out, plot::render_svg(plot::read_csv(plot_csv), plot_metric));
      std::cout << out.string() << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "lml: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "lml: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace lml
