#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lml/bagsynth.hpp"
#include "lml/config.hpp"
#include "lml/metrics.hpp"
#include "lml/model.hpp"

namespace lml {

struct RunRecord {
  nlohmann::json config;
  // Index 0 holds the losses of the initial parameters, index e those after
  // epoch e.
  std::vector<double> train_losses;
  std::vector<double> val_losses;
  int best_epoch = 0;
  std::optional<metrics::MetricsReport> metrics;
  std::string checkpoint_path;
  std::string init_scheme;
  std::string validation_protocol;
  double wall_clock_seconds = 0.0;

  double best_val_loss() const { return val_losses.at(static_cast<std::size_t>(best_epoch)); }
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

struct TrainResult {
  Model model;
  RunRecord record;
};

// Mini-batch Adam over bags. The model with the lowest validation loss
// (earliest on ties) is restored and, when `test` is non-empty, evaluated.
// Empty training bags are skipped. Deterministic given cfg.seed.
TrainResult train(const ExperimentConfig& cfg, std::span<const Bag> train_bags, std::span<const Bag> val_bags,
                  std::span<const Bag> test_bags = {}, metrics::Metadata meta = {});

TrainResult train(const ExperimentConfig& cfg, const Dataset& ds);

}  // namespace lml
