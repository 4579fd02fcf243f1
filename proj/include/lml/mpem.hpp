#pragma once

// Majority proportion enhancement: a pre-trained Counting Network labels
// training instances; instances predicted as a minority class that lie far
// from the majority-class feature prototype are removed, and the network is
// retrained from its initial parameters on the reduced bags. The removal
// ratio is chosen by validation loss.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lml/bagsynth.hpp"
#include "lml/config.hpp"
#include "lml/metrics.hpp"
#include "lml/model.hpp"
#include "lml/train.hpp"

namespace lml::mpem {

struct PrototypeSet {
  std::vector<std::optional<std::vector<double>>> prototypes;  // p_c, absent when M_c is empty
  std::vector<int> support;                                     // |M_c|

  bool has(int c) const { return prototypes.at(static_cast<std::size_t>(c)).has_value(); }
};

// M_c = instances predicted c inside bags labeled c; p_c = mean f~ over M_c.
PrototypeSet build_prototypes(const Model& model, std::span<const Bag> bags);

struct Candidate {
  std::size_t index = 0;  // instance row within the bag
  double distance = 0.0;  // ||p_c - f~(x)||_2
};

struct BagPlan {
  int bag_id = 0;
  int label = 0;
  bool skipped = false;               // majority class has no prototype
  std::vector<Candidate> candidates;  // predicted-minority instances, farthest first

  std::size_t removal_count(double r) const;
};

using RemovalPlan = std::vector<BagPlan>;

BagPlan score_bag(const Model& model, const Bag& bag, const PrototypeSet& prototypes);
RemovalPlan score_bags(const Model& model, std::span<const Bag> bags, const PrototypeSet& prototypes);

// Removes the floor(r * m) farthest candidates of each bag. Labels are kept.
std::vector<Bag> apply_removal(std::span<const Bag> bags, const RemovalPlan& plan, double r);

// Removed instances at ratio r, for purity.
std::vector<metrics::RemovedInstance> removed_instances(std::span<const Bag> bags, const RemovalPlan& plan, double r);

struct RCandidate {
  double r = 0.0;
  bool diverged = false;
  std::string error;
  std::optional<RunRecord> record;
  std::optional<Model> model;

  double min_val_loss() const { return record->best_val_loss(); }
};

struct Selection {
  std::size_t index = 0;
  double r = 0.0;
  std::vector<RCandidate> candidates;

  const Model& model() const { return *candidates.at(index).model; }
};

// Index of the smallest minimum validation loss, ties toward smaller r.
// Diverged entries are ignored; throws if all diverged.
std::size_t argmin_validation(std::span<const RCandidate> candidates);

// For each r: remove from the training bags using `plan`, retrain a fresh
// Counting Network (same initialization seed), record its validation curve.
// Validation and test bags are never modified.
Selection select_r(const ExperimentConfig& cfg, const RemovalPlan& plan, std::span<const Bag> train_bags,
                   std::span<const Bag> val_bags, std::span<const Bag> test_bags, std::span<const double> grid);

struct ScatterPoint {
  int bag_id = 0;
  double before = 0.0;
  std::optional<double> after;  // absent when every instance was removed
};

struct RReport {
  double r = 0.0;
  bool diverged = false;
  std::vector<double> val_losses;
  double min_val_loss = 0.0;
  int best_epoch = 0;
  std::size_t removed = 0;
  std::optional<double> purity;
  double agreement_rate = 0.0;
  double random_agreement_rate = 0.0;
  std::optional<metrics::MetricsReport> test_metrics;
  std::vector<ScatterPoint> scatter;
};

struct Report {
  RunRecord pretrain;
  RunRecord selected;  // retraining run at the selected r
  PrototypeSet prototypes;
  RemovalPlan plan;
  std::vector<RReport> per_r;
  double selected_r = 0.0;
  std::size_t selected_index = 0;
};

struct PipelineResult {
  Model model;  // the retrained model at the selected r
  Report report;
};

PipelineResult run_pipeline(const ExperimentConfig& cfg, std::span<const Bag> train_bags,
                            std::span<const Bag> val_bags, std::span<const Bag> test_bags);
PipelineResult run_pipeline(const ExperimentConfig& cfg, const Dataset& ds);

nlohmann::json to_json(const Report& report);

// One metrics CSV row per r of the grid.
std::vector<std::string> csv_rows(const Report& report);

}  // namespace lml::mpem
