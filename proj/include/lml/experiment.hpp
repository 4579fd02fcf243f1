#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lml/bagsynth.hpp"
#include "lml/config.hpp"
#include "lml/metrics.hpp"
#include "lml/train.hpp"

namespace lml {

// Disjoint test folds over n bags covering every bag; sizes differ by at
// most one. Reproducible from seed.
std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int folds, std::uint64_t seed);

// Fraction of training-fold bags held out for validation.
inline constexpr double kValidationFraction = 0.2;

// Bag-level k-fold cross-validation. Fold k tests on partition k; the
// validation set is a seeded 20% of the remaining bags. counting+mpem runs
// the full pipeline per fold and reports the selected-r run.
std::vector<RunRecord> crossval(const ExperimentConfig& cfg, std::span<const Bag> bags);

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one fold
};

std::vector<MetricSummary> summarize(std::span<const RunRecord> records);

// One run of cfg.method on a generated dataset (or folds when cfg.folds >= 2);
// returns the test metrics rows.
std::vector<metrics::MetricsReport> run_cell(const ExperimentConfig& cfg);

// scenario x method grid from cfg.sweep_scenarios / cfg.sweep_methods, in
// grid order (scenario-major).
std::vector<metrics::MetricsReport> sweep(const ExperimentConfig& cfg);

}  // namespace lml
