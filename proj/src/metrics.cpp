#include "lml/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "lml/countnet.hpp"
#include "lml/errors.hpp"
#include "lml/heads.hpp"

namespace lml::metrics {

double median(std::vector<double> values) {
  if (values.empty()) throw UndefinedMetricError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double MetricsReport::proportion_error_mean() const {
  if (proportion_errors.empty()) throw UndefinedMetricError("no proportion errors");
  return std::accumulate(proportion_errors.begin(), proportion_errors.end(), 0.0) /
         static_cast<double>(proportion_errors.size());
}

double MetricsReport::proportion_error_median() const { return median(proportion_errors); }

double instance_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw DimensionError("prediction and label counts differ");
  if (predictions.empty()) throw UndefinedMetricError("instance accuracy over zero instances");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double bag_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw DimensionError("prediction and label counts differ");
  if (predictions.empty()) throw UndefinedMetricError("bag accuracy over zero bags");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double consistency_rate(std::span<const int> aggregated, std::span<const int> counted,
                        std::span<const int> truth) {
  if (aggregated.size() != truth.size() || counted.size() != truth.size()) {
    throw DimensionError("consistency inputs have different lengths");
  }
  std::size_t num = 0, den = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (aggregated[i] != truth[i]) continue;
    ++den;
    if (counted[i] == aggregated[i]) ++num;
  }
  if (den == 0) throw UndefinedMetricError("consistency rate: no bag has a correct aggregated prediction");
  return static_cast<double>(num) / static_cast<double>(den);
}

double consistency_rate(const Model& model, std::span<const Bag> bags) {
  const auto evals = evaluate_bags(model, bags);
  std::vector<int> agg, cnt, truth;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    agg.push_back(argmax(evals[i].bag_output));
    const auto counts = countnet::hard_counts(evals[i].instance_predictions, model.spec().num_classes);
    cnt.push_back(argmax(std::span<const int>(counts)));
    truth.push_back(bags[i].label);
  }
  return consistency_rate(agg, cnt, truth);
}

double proportion_error(std::span<const int> instance_predictions, const Bag& bag, int num_classes) {
  if (instance_predictions.size() != bag.size()) throw DimensionError("prediction count differs from bag size");
  if (bag.size() == 0) throw UndefinedMetricError("proportion error of an empty bag");
  const auto truth = true_count_vector(bag, num_classes);
  const int major = bag.label;
  const auto predicted = std::count(instance_predictions.begin(), instance_predictions.end(), major);
  const double n = static_cast<double>(bag.size());
  return static_cast<double>(predicted) / n - static_cast<double>(truth[static_cast<std::size_t>(major)]) / n;
}

double proportion_error(const Model& model, const Bag& bag) {
  return proportion_error(countnet::predict_instances(model, bag), bag, model.spec().num_classes);
}

std::optional<double> purity(std::span<const RemovedInstance> removed) {
  if (removed.empty()) return std::nullopt;
  std::size_t minority = 0;
  for (const auto& r : removed) minority += r.true_class != r.bag_label;
  return static_cast<double>(minority) / static_cast<double>(removed.size());
}

double agreement_rate(std::span<const Bag> before, std::span<const Bag> after, int num_classes) {
  if (before.size() != after.size()) throw DimensionError("agreement needs paired bag sets");
  if (before.empty()) throw UndefinedMetricError("agreement over zero bags");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (after[i].size() == 0) continue;
    const auto counts = true_count_vector(after[i], num_classes);
    try {
      agree += majority_class(counts) == before[i].label;
    } catch (const AmbiguousMajorityError&) {
    }
  }
  return static_cast<double>(agree) / static_cast<double>(before.size());
}

std::vector<Bag> random_removal(std::span<const Bag> bags, std::span<const int> removal_counts, Rng& rng) {
  if (bags.size() != removal_counts.size()) throw DimensionError("one removal count per bag required");
  std::vector<Bag> out;
  out.reserve(bags.size());
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const Bag& src = bags[b];
    const auto n = src.size();
    const auto k = static_cast<std::size_t>(std::clamp(removal_counts[b], 0, static_cast<int>(n)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<char> drop(n, 0);
    for (std::size_t i = 0; i < k; ++i) drop[idx[i]] = 1;
    Bag bag;
    bag.id = src.id;
    bag.label = src.label;
    bag.instances = ad::Tensor(n - k, src.instances.cols);
    std::size_t row = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (drop[i]) continue;
      auto s = src.instances.row_span(i);
      std::copy(s.begin(), s.end(), bag.instances.row_span(row++).begin());
      bag.hidden_labels.push_back(src.hidden_labels[i]);
    }
    out.push_back(std::move(bag));
  }
  return out;
}

MetricsReport evaluate(const Model& model, std::span<const Bag> bags, Metadata meta) {
  MetricsReport rep;
  rep.meta = std::move(meta);
  const int c = model.spec().num_classes;
  const auto evals = evaluate_bags(model, bags);
  std::vector<int> inst_pred, inst_true, agg, cnt, truth;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const auto& e = evals[i];
    inst_pred.insert(inst_pred.end(), e.instance_predictions.begin(), e.instance_predictions.end());
    inst_true.insert(inst_true.end(), bags[i].hidden_labels.begin(), bags[i].hidden_labels.end());
    agg.push_back(argmax(e.bag_output));
    const auto counts = countnet::hard_counts(e.instance_predictions, c);
    cnt.push_back(argmax(std::span<const int>(counts)));
    truth.push_back(bags[i].label);
    rep.proportion_errors.push_back(proportion_error(e.instance_predictions, bags[i], c));
  }
  rep.instance_accuracy = instance_accuracy(inst_pred, inst_true);
  rep.bag_accuracy = bag_accuracy(agg, truth);
  try {
    rep.consistency_rate = consistency_rate(agg, cnt, truth);
  } catch (const UndefinedMetricError&) {
    rep.consistency_rate.reset();
  }
  return rep;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
  return {{"instance_accuracy", r.instance_accuracy},
          {"bag_accuracy", r.bag_accuracy},
          {"consistency_rate", opt(r.consistency_rate)},
          {"consistency_definition", kConsistencyDefinition},
          {"proportion_errors", r.proportion_errors},
          {"purity", opt(r.purity)},
          {"agreement_rate", opt(r.agreement_rate)},
          {"random_agreement_rate", opt(r.random_agreement_rate)},
          {"metadata",
           {{"seed", r.meta.seed},
            {"fold", r.meta.fold},
            {"scenario", r.meta.scenario},
            {"method", r.meta.method},
            {"epoch", r.meta.epoch},
            {"r", opt(r.meta.r)}}}};
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.instance_accuracy = j.at("instance_accuracy").get<double>();
  r.bag_accuracy = j.at("bag_accuracy").get<double>();
  r.consistency_rate = opt_from(j, "consistency_rate");
  r.proportion_errors = j.at("proportion_errors").get<std::vector<double>>();
  r.purity = opt_from(j, "purity");
  r.agreement_rate = opt_from(j, "agreement_rate");
  r.random_agreement_rate = opt_from(j, "random_agreement_rate");
  const auto& m = j.at("metadata");
  r.meta.seed = m.at("seed").get<std::uint64_t>();
  r.meta.fold = m.at("fold").get<int>();
  r.meta.scenario = m.at("scenario").get<std::string>();
  r.meta.method = m.at("method").get<std::string>();
  r.meta.epoch = m.at("epoch").get<int>();
  r.meta.r = opt_from(m, "r");
  return r;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_header() {
  return "method,scenario,fold,seed,r,epoch,num_bags,instance_accuracy,bag_accuracy,consistency_rate,"
         "proportion_error_mean,proportion_error_median,purity,agreement_rate,random_agreement_rate";
}

std::string csv_row(const MetricsReport& r) {
  std::string s;
  s += r.meta.method + "," + r.meta.scenario + "," + std::to_string(r.meta.fold) + "," +
       std::to_string(r.meta.seed) + "," + opt_cell(r.meta.r) + "," + std::to_string(r.meta.epoch) + "," +
       std::to_string(r.proportion_errors.size()) + ",";
  s += format_double(r.instance_accuracy) + "," + format_double(r.bag_accuracy) + "," +
       opt_cell(r.consistency_rate) + ",";
  if (r.proportion_errors.empty()) {
    s += ",,";
  } else {
    s += format_double(r.proportion_error_mean()) + "," + format_double(r.proportion_error_median()) + ",";
  }
  s += opt_cell(r.purity) + "," + opt_cell(r.agreement_rate) + "," + opt_cell(r.random_agreement_rate);
  return s;
}

}  // namespace lml::metrics
