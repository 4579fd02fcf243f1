#include "lml/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "lml/errors.hpp"
#include "lml/heads.hpp"

namespace lml {

namespace {

constexpr std::uint64_t kShuffleStream = 201;

std::string format_loss(double v) { return metrics::format_double(v); }

}  // namespace

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json j = {{"config", r.config},
                      {"train_losses", r.train_losses},
                      {"val_losses", r.val_losses},
                      {"best_epoch", r.best_epoch},
                      {"checkpoint_path", r.checkpoint_path},
                      {"init_scheme", r.init_scheme},
                      {"validation_protocol", r.validation_protocol},
                      {"wall_clock_seconds", r.wall_clock_seconds}};
  j["metrics"] = r.metrics ? metrics::to_json(*r.metrics) : nlohmann::json(nullptr);
  return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.config = j.at("config");
  r.train_losses = j.at("train_losses").get<std::vector<double>>();
  r.val_losses = j.at("val_losses").get<std::vector<double>>();
  r.best_epoch = j.at("best_epoch").get<int>();
  r.checkpoint_path = j.value("checkpoint_path", std::string());
  r.init_scheme = j.value("init_scheme", std::string());
  r.validation_protocol = j.value("validation_protocol", std::string());
  r.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
  if (j.contains("metrics") && !j.at("metrics").is_null()) r.metrics = metrics::metrics_from_json(j.at("metrics"));
  return r;
}

TrainResult train(const ExperimentConfig& cfg, std::span<const Bag> train_bags, std::span<const Bag> val_bags,
                  std::span<const Bag> test_bags, metrics::Metadata meta) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  if (val_bags.empty()) throw ConfigError("training needs at least one validation bag");

  std::vector<const Bag*> pool;
  for (const Bag& b : train_bags)
    if (b.size() > 0) pool.push_back(&b);
  if (pool.empty()) throw ConfigError("training needs at least one non-empty bag");

  Model model(cfg.model_spec(cfg.data.feature_dim));
  RunRecord rec;
  rec.config = to_json(cfg);
  rec.init_scheme = model.spec().init;
  rec.validation_protocol = "held-out validation bags; best epoch = argmin validation loss, earliest on ties";

  std::vector<Bag> nonempty_train;
  nonempty_train.reserve(pool.size());
  for (const Bag* b : pool) nonempty_train.push_back(*b);

  rec.train_losses.push_back(mean_bag_loss(model, nonempty_train));
  rec.val_losses.push_back(mean_bag_loss(model, val_bags));
  ad::ParameterStore best = model.params();
  double best_loss = rec.val_losses.back();

  Rng shuffle = make_rng(cfg.seed, kShuffleStream);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(pool.begin(), pool.end(), shuffle);
    double epoch_loss = 0.0;
    for (std::size_t startb = 0, bi = 0; startb < pool.size(); startb += batch, ++bi) {
      const std::size_t stop = std::min(pool.size(), startb + batch);
      const Batch b = make_batch(std::span<const Bag* const>(pool.data() + startb, stop - startb));
      ad::Graph g;
      ParamBinder p(g, model);
      ad::Var loss = batch_loss(p, b);
      const double value = loss.value().data[0];
      if (!std::isfinite(value)) {
        throw NonFiniteError("non-finite loss " + format_loss(value) + " at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(bi));
      }
      g.backward(loss);
      ad::adam_step(model.params(), cfg.adam);
      epoch_loss += value * static_cast<double>(stop - startb);
    }
    rec.train_losses.push_back(epoch_loss / static_cast<double>(pool.size()));
    const double val = mean_bag_loss(model, val_bags);
    if (!std::isfinite(val)) {
      throw NonFiniteError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    rec.val_losses.push_back(val);
    if (val < best_loss) {
      best_loss = val;
      best = model.params();
      rec.best_epoch = epoch;
    }
  }
  model.params().copy_values_from(best);
  model.params().set_step(best.step());

  if (!test_bags.empty()) {
    meta.epoch = rec.best_epoch;
    meta.seed = cfg.seed;
    if (meta.method.empty()) meta.method = to_string(cfg.method);
    if (meta.scenario.empty()) meta.scenario = to_string(cfg.data.scenario);
    rec.metrics = metrics::evaluate(model, test_bags, meta);
  }
  rec.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(rec)};
}

TrainResult train(const ExperimentConfig& cfg, const Dataset& ds) {
  return train(cfg, ds.train, ds.validation, ds.test);
}

}  // namespace lml
