#include "lml/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lml/errors.hpp"
#include "lml/mpem.hpp"
#include "lml/parallel.hpp"

namespace lml {

namespace {

constexpr std::uint64_t kFoldStream = 301;
constexpr std::uint64_t kValSplitStream = 302;
constexpr std::uint64_t kPoolStream = 303;

RunRecord run_method(const ExperimentConfig& cfg, std::span<const Bag> train_bags, std::span<const Bag> val_bags,
                     std::span<const Bag> test_bags, metrics::Metadata meta) {
  if (cfg.method == Method::CountingMpem) {
    auto res = mpem::run_pipeline(cfg, train_bags, val_bags, test_bags);
    RunRecord rec = res.report.selected;
    if (rec.metrics) {
      const auto& rr = res.report.per_r.at(res.report.selected_index);
      rec.metrics->meta.fold = meta.fold;
      rec.metrics->meta.method = to_string(cfg.method);
      rec.metrics->purity = rr.purity;
      rec.metrics->agreement_rate = rr.agreement_rate;
      rec.metrics->random_agreement_rate = rr.random_agreement_rate;
    }
    return rec;
  }
  return train(cfg, train_bags, val_bags, test_bags, std::move(meta)).record;
}

}  // namespace

std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 1) throw ConfigError("folds must be >= 1");
  if (n < static_cast<std::size_t>(folds)) {
    throw ConfigError("cannot split " + std::to_string(n) + " bags into " + std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_rng(seed, kFoldStream);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  const auto k = static_cast<std::size_t>(folds);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * n / k, hi = (f + 1) * n / k;
    out[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(lo), perm.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(out[f].begin(), out[f].end());
  }
  return out;
}

std::vector<RunRecord> crossval(const ExperimentConfig& cfg, std::span<const Bag> bags) {
  if (cfg.folds < 2) throw ConfigError("cross-validation needs folds >= 2");
  const auto parts = fold_partition(bags.size(), cfg.folds, cfg.seed);
  std::vector<RunRecord> records(parts.size());
  ExperimentConfig inner = cfg;
  inner.jobs = 1;
  parallel_for(parts.size(), cfg.jobs, [&](std::size_t f) {
    std::vector<char> in_test(bags.size(), 0);
    for (std::size_t i : parts[f]) in_test[i] = 1;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < bags.size(); ++i)
      if (!in_test[i]) rest.push_back(i);
    Rng rng = make_rng(cfg.seed, kValSplitStream, f);
    std::shuffle(rest.begin(), rest.end(), rng);
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(kValidationFraction * rest.size())));
    if (n_val >= rest.size()) throw ConfigError("too few bags for a train/validation split");
    std::sort(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::sort(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
    std::vector<Bag> val, trn, test;
    for (std::size_t i = 0; i < rest.size(); ++i) (i < n_val ? val : trn).push_back(bags[rest[i]]);
    for (std::size_t i : parts[f]) test.push_back(bags[i]);
    metrics::Metadata meta;
    meta.fold = static_cast<int>(f);
    records[f] = run_method(inner, trn, val, test, meta);
    records[f].validation_protocol =
        "fold " + std::to_string(f) + ": validation = seeded 20% of the training folds";
  });
  return records;
}

std::vector<MetricSummary> summarize(std::span<const RunRecord> records) {
  std::vector<MetricSummary> out;
  auto add = [&](const std::string& name, auto getter) {
    std::vector<double> vals;
    for (const auto& r : records)
      if (r.metrics) {
        if (auto v = getter(*r.metrics)) vals.push_back(*v);
      }
    if (vals.empty()) return;
    MetricSummary s;
    s.name = name;
    s.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
    if (vals.size() > 1) {
      double ss = 0.0;
      for (double v : vals) ss += (v - s.mean) * (v - s.mean);
      s.stddev = std::sqrt(ss / static_cast<double>(vals.size() - 1));
    }
    out.push_back(s);
  };
  add("instance_accuracy", [](const metrics::MetricsReport& m) { return std::optional<double>(m.instance_accuracy); });
  add("bag_accuracy", [](const metrics::MetricsReport& m) { return std::optional<double>(m.bag_accuracy); });
  add("consistency_rate", [](const metrics::MetricsReport& m) { return m.consistency_rate; });
  add("proportion_error_mean", [](const metrics::MetricsReport& m) {
    return m.proportion_errors.empty() ? std::nullopt : std::optional<double>(m.proportion_error_mean());
  });
  return out;
}

std::vector<metrics::MetricsReport> run_cell(const ExperimentConfig& cfg) {
  std::vector<metrics::MetricsReport> rows;
  if (cfg.folds >= 2) {
    const ClassPool pool = make_pool(cfg.data);
    const int total = cfg.data.train_bags + cfg.data.val_bags + cfg.data.test_bags;
    const auto bags = make_bags(cfg.data, pool, kPoolStream, total);
    for (auto& rec : crossval(cfg, bags))
      if (rec.metrics) rows.push_back(*rec.metrics);
    return rows;
  }
  const Dataset ds = make_dataset(cfg.data);
  metrics::Metadata meta;
  RunRecord rec = run_method(cfg, ds.train, ds.validation, ds.test, meta);
  if (rec.metrics) rows.push_back(*rec.metrics);
  return rows;
}

std::vector<metrics::MetricsReport> sweep(const ExperimentConfig& cfg) {
  std::vector<ExperimentConfig> cells;
  for (const auto& s : cfg.sweep_scenarios) {
    for (const auto& m : cfg.sweep_methods) {
      ExperimentConfig c = cfg;
      c.data.scenario = parse_scenario(s);
      c.method = parse_method(m);
      c.jobs = 1;
      c.validate();
      cells.push_back(std::move(c));
    }
  }
  std::vector<std::vector<metrics::MetricsReport>> results(cells.size());
  parallel_for(cells.size(), cfg.jobs, [&](std::size_t i) { results[i] = run_cell(cells[i]); });
  std::vector<metrics::MetricsReport> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

}  // namespace lml
