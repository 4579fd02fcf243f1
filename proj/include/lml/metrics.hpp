#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lml/bagsynth.hpp"
#include "lml/model.hpp"

namespace lml::metrics {

// Which bags form the consistency denominator: those whose aggregated bag
// output argmax equals the true label.
inline constexpr const char* kConsistencyDefinition = "denominator=aggregated-argmax-correct";

struct Metadata {
  std::uint64_t seed = 0;
  int fold = 0;
  std::string scenario;
  std::string method;
  int epoch = 0;
  std::optional<double> r;
};

struct MetricsReport {
  double instance_accuracy = 0.0;
  double bag_accuracy = 0.0;
  std::optional<double> consistency_rate;  // absent when no bag is predicted correctly
  std::vector<double> proportion_errors;
  std::optional<double> purity;
  std::optional<double> agreement_rate;
  std::optional<double> random_agreement_rate;
  Metadata meta;

  double proportion_error_mean() const;
  double proportion_error_median() const;
};

double instance_accuracy(std::span<const int> predictions, std::span<const int> labels);
double bag_accuracy(std::span<const int> predictions, std::span<const int> labels);

// Numerator: bags where aggregated argmax == count argmax == truth.
// Denominator: bags where aggregated argmax == truth.
double consistency_rate(std::span<const int> aggregated, std::span<const int> counted,
                        std::span<const int> truth);
double consistency_rate(const Model& model, std::span<const Bag> bags);

// (#instances predicted as the true majority class - true majority count) / |B|
double proportion_error(std::span<const int> instance_predictions, const Bag& bag, int num_classes);
double proportion_error(const Model& model, const Bag& bag);

struct RemovedInstance {
  int true_class = 0;
  int bag_label = 0;
};

// Fraction of removed instances whose true class differs from their bag's
// label; absent when nothing was removed.
std::optional<double> purity(std::span<const RemovedInstance> removed);

// Fraction of bags whose original label equals the unique majority of the
// hidden labels after removal. Ties and empty bags count as disagreement.
double agreement_rate(std::span<const Bag> before, std::span<const Bag> after, int num_classes);

// Removes removal_counts[i] instances uniformly without replacement from bag i.
std::vector<Bag> random_removal(std::span<const Bag> bags, std::span<const int> removal_counts, Rng& rng);

MetricsReport evaluate(const Model& model, std::span<const Bag> bags, Metadata meta = {});

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const nlohmann::json& j);

// CSV with one row per (method, scenario, fold, r).
std::string csv_header();
std::string csv_row(const MetricsReport& r);
std::string format_double(double v);

double median(std::vector<double> values);

}  // namespace lml::metrics
