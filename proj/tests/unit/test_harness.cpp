#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lml/checkpoint.hpp"
#include "lml/cli.hpp"
#include "lml/config.hpp"
#include "lml/errors.hpp"
#include "lml/experiment.hpp"
#include "lml/heads.hpp"
#include "lml/metrics.hpp"
#include "lml/parallel.hpp"
#include "lml/plot.hpp"
#include "lml/train.hpp"

using namespace lml;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lml");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

void write_config(const fs::path& p, const ExperimentConfig& cfg) { std::ofstream(p) << to_json(cfg).dump(); }

}  // namespace

TEST_CASE("config json round trip and validation") {
  auto cfg = testing::tiny_config();
  cfg.method = Method::FeatureLse;
  auto back = config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  auto j = to_json(cfg);
  j["no_such_key"] = 1;
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  cfg.epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(parse_method("counting-ish"), ConfigError);
}

TEST_CASE("no-count ablation uses a unit instance temperature") {
  auto cfg = testing::tiny_config();
  cfg.method = Method::CountingNoCount;
  auto spec = cfg.model_spec(2);
  CHECK(spec.t_inst == 1.0);
  CHECK(spec.t_bag == cfg.t_bag);
}

TEST_CASE("zero epochs returns the initial model") {
  auto cfg = testing::tiny_config();
  cfg.epochs = 0;
  const Dataset ds = make_dataset(cfg.data);
  auto result = train(cfg, ds);
  Model fresh(cfg.model_spec(ds.config.feature_dim));
  for (const auto& [name, e] : fresh.params().entries()) CHECK(result.model.params().at(name).value == e.value);
  CHECK(result.record.best_epoch == 0);
  CHECK(result.record.val_losses.size() == 1);
  CHECK(result.record.metrics.has_value());
}

TEST_CASE("training is deterministic and restores the best epoch") {
  auto cfg = testing::tiny_config();
  const Dataset ds = make_dataset(cfg.data);
  auto a = train(cfg, ds);
  auto b = train(cfg, ds);
  CHECK(a.record.val_losses == b.record.val_losses);
  CHECK(a.record.train_losses.size() == static_cast<std::size_t>(cfg.epochs + 1));
  const double best = *std::min_element(a.record.val_losses.begin(), a.record.val_losses.end());
  CHECK(a.record.best_val_loss() == best);
  CHECK(mean_bag_loss(a.model, ds.validation) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is bit exact") {
  for (auto method : {Method::Counting, Method::OutputMean, Method::FeaturePnorm}) {
    Model m(testing::small_spec(method));
    auto path = testing::temp_dir("ckpt") / "m.ckpt";
    save_checkpoint(m, path, {{"note", 1}});
    nlohmann::json extra;
    Model back = load_checkpoint(path, &extra);
    CHECK(extra["note"] == 1);
    CHECK(to_json(back.spec()) == to_json(m.spec()));
    for (const auto& [name, e] : m.params().entries()) CHECK(back.params().at(name).value == e.value);
  }
}

TEST_CASE("corrupt checkpoints are rejected") {
  auto path = testing::temp_dir("badckpt") / "bad.ckpt";
  std::ofstream(path) << "NOTACKPT\n";
  CHECK_THROWS(load_checkpoint(path));
}

TEST_CASE("fold partition covers every bag once") {
  auto folds = fold_partition(100, 5, 3);
  REQUIRE(folds.size() == 5);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    CHECK(f.size() == 20);
    seen.insert(f.begin(), f.end());
  }
  CHECK(seen.size() == 100);
  CHECK(fold_partition(100, 5, 3) == folds);
  CHECK_FALSE(fold_partition(100, 5, 4) == folds);
  auto uneven = fold_partition(7, 3, 0);
  CHECK(uneven[0].size() + uneven[1].size() + uneven[2].size() == 7);
  CHECK_THROWS_AS(fold_partition(2, 3, 0), ConfigError);
}

TEST_CASE("cross validation runs one record per fold") {
  auto cfg = testing::tiny_config();
  cfg.folds = 3;
  cfg.epochs = 1;
  const Dataset ds = make_dataset(cfg.data);
  auto records = crossval(cfg, ds.train);
  REQUIRE(records.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(records[k].metrics->meta.fold == static_cast<int>(k));
  auto summary = summarize(records);
  CHECK(std::any_of(summary.begin(), summary.end(), [](const auto& s) { return s.name == "instance_accuracy"; }));
}

TEST_CASE("parallel for rethrows the first error by index") {
  std::vector<int> hit(8, 0);
  parallel_for(8, 3, [&](std::size_t i) { hit[i] = 1; });
  CHECK(std::count(hit.begin(), hit.end(), 1) == 8);
  CHECK_THROWS_WITH(parallel_for(8, 2, [](std::size_t i) {
                      if (i == 3 || i == 6) throw std::runtime_error(std::to_string(i));
                    }),
                    "3");
}

TEST_CASE("cli end to end") {
  const fs::path dir = testing::temp_dir("cli");
  auto cfg = testing::tiny_config();
  cfg.r_grid = {0.0, 0.5, 1.0};
  write_config(dir / "cfg.json", cfg);
  const std::string c = (dir / "cfg.json").string();

  REQUIRE(cli({"generate", "--config", c, "--out", (dir / "data.json").string()}) == 0);
  REQUIRE(cli({"train", "--config", c, "--data", (dir / "data.json").string(), "--out", (dir / "run").string()}) == 0);
  CHECK(fs::exists(dir / "run" / "model.ckpt"));
  CHECK(count_lines(dir / "run" / "results.csv") == 2);

  CHECK(cli({"evaluate", "--checkpoint", (dir / "run" / "model.ckpt").string(), "--data", (dir / "data.json").string(),
             "--out", (dir / "eval.json").string()}) == 0);
  std::ifstream eval_in(dir / "eval.json");
  auto ev = nlohmann::json::parse(eval_in);
  auto rec = nlohmann::json::parse(std::ifstream(dir / "run" / "run_record.json"));
  CHECK(ev["instance_accuracy"] == rec["metrics"]["instance_accuracy"]);

  REQUIRE(cli({"mpem", "--config", c, "--data", (dir / "data.json").string(), "--out", (dir / "mpem").string()}) == 0);
  CHECK(count_lines(dir / "mpem" / "mpem.csv") == 1 + 3);

  REQUIRE(cli({"sweep", "--config", c, "--out", (dir / "sweep.csv").string()}) == 0);
  CHECK(count_lines(dir / "sweep.csv") == 1 + 6);

  CHECK(cli({"plot", "--csv", (dir / "sweep.csv").string(), "--out", (dir / "sweep.svg").string()}) == 0);
  CHECK(cli({"plot", "--csv", (dir / "mpem" / "mpem.csv").string()}) == 0);
  CHECK(fs::exists(dir / "mpem" / "mpem.svg"));
}

TEST_CASE("cli usage errors exit with 2") {
  const fs::path dir = testing::temp_dir("cli_err");
  CHECK(cli({}) == 2);
  CHECK(cli({"train", "--bogus"}) == 2);
  std::ofstream(dir / "bad.json") << R"({"epochz": 3})";
  CHECK(cli({"generate", "--config", (dir / "bad.json").string(), "--out", (dir / "d.json").string()}) == 2);
  CHECK(cli({"train", "--method", "nope", "--out", dir.string()}) == 2);
}

TEST_CASE("plot renders lines by r and bars otherwise") {
  const fs::path dir = testing::temp_dir("plot");
  metrics::MetricsReport r;
  r.instance_accuracy = 0.5;
  r.bag_accuracy = 0.5;
  r.proportion_errors = {0.0};
  r.meta.method = "counting";
  r.meta.scenario = "small";
  {
    std::ofstream out(dir / "bars.csv");
    out << metrics::csv_header() << '\n' << metrics::csv_row(r) << '\n';
  }
  auto bars = plot::render_svg(plot::read_csv(dir / "bars.csv"), "instance_accuracy");
  CHECK(bars.find("<rect x=") != std::string::npos);
  CHECK(bars.find("<path") == std::string::npos);
  r.meta.r = 0.5;
  {
    std::ofstream out(dir / "lines.csv");
    out << metrics::csv_header() << '\n' << metrics::csv_row(r) << '\n' << metrics::csv_header() << '\n';
  }
  auto lines = plot::render_svg(plot::read_csv(dir / "lines.csv"), "instance_accuracy");
  CHECK(lines.find("<path") != std::string::npos);
  CHECK_THROWS_AS(plot::render_svg(plot::read_csv(dir / "lines.csv"), "nope"), ConfigError);
}
