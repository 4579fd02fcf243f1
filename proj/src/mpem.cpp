#include "lml/mpem.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "lml/errors.hpp"
#include "lml/heads.hpp"
#include "lml/parallel.hpp"

namespace lml::mpem {

namespace {

constexpr std::uint64_t kRandomRemovalStream = 401;

double majority_proportion(const Bag& bag) {
  if (bag.size() == 0) return 0.0;
  const auto hits = std::count(bag.hidden_labels.begin(), bag.hidden_labels.end(), bag.label);
  return static_cast<double>(hits) / static_cast<double>(bag.size());
}

const BagPlan& plan_for(const RemovalPlan& plan, std::size_t i, const Bag& bag) {
  if (i >= plan.size()) throw DimensionError("removal plan does not cover bag " + std::to_string(bag.id));
  const BagPlan& p = plan[i];
  if (p.bag_id != bag.id) {
    throw DimensionError("removal plan entry " + std::to_string(i) + " is for bag " + std::to_string(p.bag_id) +
                         ", not " + std::to_string(bag.id));
  }
  return p;
}

}  // namespace

PrototypeSet build_prototypes(const Model& model, std::span<const Bag> bags) {
  const auto c = static_cast<std::size_t>(model.spec().num_classes);
  const auto h = static_cast<std::size_t>(model.feature_width());
  std::vector<std::vector<double>> sums(c, std::vector<double>(h, 0.0));
  PrototypeSet set;
  set.support.assign(c, 0);
  for (const Bag& bag : bags) {
    if (bag.size() == 0) continue;
    const ad::Tensor z = logits(model, bag.instances);
    const ad::Tensor f = features(model, bag.instances);
    for (std::size_t i = 0; i < bag.size(); ++i) {
      if (argmax(z.row_span(i)) != bag.label) continue;
      auto row = f.row_span(i);
      auto& acc = sums[static_cast<std::size_t>(bag.label)];
      for (std::size_t k = 0; k < h; ++k) acc[k] += row[k];
      ++set.support[static_cast<std::size_t>(bag.label)];
    }
  }
  set.prototypes.resize(c);
  bool any = false;
  for (std::size_t k = 0; k < c; ++k) {
    if (set.support[k] == 0) continue;
    for (double& v : sums[k]) v /= static_cast<double>(set.support[k]);
    set.prototypes[k] = std::move(sums[k]);
    any = true;
  }
  if (!any) throw DegeneratePredictorError("degenerate predictor: no class has a prototype");
  return set;
}

std::size_t BagPlan::removal_count(double r) const {
  const double exact = r * static_cast<double>(candidates.size());
  // guard against r * m landing a hair below an integer
  return std::min(candidates.size(), static_cast<std::size_t>(std::floor(exact + 1e-9)));
}

BagPlan score_bag(const Model& model, const Bag& bag, const PrototypeSet& prototypes) {
  BagPlan plan;
  plan.bag_id = bag.id;
  plan.label = bag.label;
  if (!prototypes.has(bag.label)) {
    plan.skipped = true;
    return plan;
  }
  if (bag.size() == 0) return plan;
  const auto& proto = *prototypes.prototypes[static_cast<std::size_t>(bag.label)];
  const ad::Tensor z = logits(model, bag.instances);
  const ad::Tensor f = features(model, bag.instances);
  for (std::size_t i = 0; i < bag.size(); ++i) {
    if (argmax(z.row_span(i)) == bag.label) continue;
    auto row = f.row_span(i);
    double sq = 0.0;
    for (std::size_t k = 0; k < proto.size(); ++k) sq += (proto[k] - row[k]) * (proto[k] - row[k]);
    plan.candidates.push_back({i, std::sqrt(sq)});
  }
  std::stable_sort(plan.candidates.begin(), plan.candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.distance > b.distance; });
  return plan;
}

RemovalPlan score_bags(const Model& model, std::span<const Bag> bags, const PrototypeSet& prototypes) {
  RemovalPlan plan;
  plan.reserve(bags.size());
  std::size_t skipped = 0;
  for (const Bag& b : bags) {
    plan.push_back(score_bag(model, b, prototypes));
    skipped += plan.back().skipped ? 1 : 0;
  }
  if (skipped > 0) std::cerr << "mpem: " << skipped << " bag(s) skipped, their majority class has no prototype\n";
  return plan;
}

std::vector<Bag> apply_removal(std::span<const Bag> bags, const RemovalPlan& plan, double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("removal ratio must lie in [0, 1]");
  std::vector<Bag> out;
  out.reserve(bags.size());
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const Bag& src = bags[b];
    const BagPlan& p = plan_for(plan, b, src);
    const std::size_t k = p.removal_count(r);
    std::vector<char> drop(src.size(), 0);
    for (std::size_t i = 0; i < k; ++i) drop.at(p.candidates[i].index) = 1;
    Bag bag;
    bag.id = src.id;
    bag.label = src.label;
    bag.instances = ad::Tensor(src.size() - k, src.instances.cols);
    std::size_t row = 0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (drop[i]) continue;
      auto s = src.instances.row_span(i);
      std::copy(s.begin(), s.end(), bag.instances.row_span(row++).begin());
      bag.hidden_labels.push_back(src.hidden_labels[i]);
    }
    out.push_back(std::move(bag));
  }
  return out;
}

std::vector<metrics::RemovedInstance> removed_instances(std::span<const Bag> bags, const RemovalPlan& plan,
                                                        double r) {
  std::vector<metrics::RemovedInstance> out;
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const BagPlan& p = plan_for(plan, b, bags[b]);
    const std::size_t k = p.removal_count(r);
    for (std::size_t i = 0; i < k; ++i) {
      out.push_back({bags[b].hidden_labels.at(p.candidates[i].index), bags[b].label});
    }
  }
  return out;
}

std::size_t argmin_validation(std::span<const RCandidate> candidates) {
  std::size_t best = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.diverged || !c.record) continue;
    if (best == candidates.size()) {
      best = i;
      continue;
    }
    const double a = c.min_val_loss();
    const double b = candidates[best].min_val_loss();
    if (a < b || (a == b && c.r < candidates[best].r)) best = i;
  }
  if (best == candidates.size()) throw NonFiniteError("every removal ratio diverged during retraining");
  return best;
}

Selection select_r(const ExperimentConfig& cfg, const RemovalPlan& plan, std::span<const Bag> train_bags,
                   std::span<const Bag> val_bags, std::span<const Bag> test_bags, std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("r grid must not be empty");
  Selection sel;
  sel.candidates.resize(grid.size());
  parallel_for(grid.size(), cfg.jobs, [&](std::size_t i) {
    RCandidate& c = sel.candidates[i];
    c.r = grid[i];
    const auto reduced = apply_removal(train_bags, plan, c.r);
    metrics::Metadata meta;
    meta.method = to_string(cfg.method);
    meta.r = c.r;
    try {
      TrainResult res = train(cfg, reduced, val_bags, test_bags, meta);
      c.record = std::move(res.record);
      c.model = std::move(res.model);
    } catch (const NonFiniteError& e) {
      c.diverged = true;
      c.error = e.what();
      std::cerr << "mpem: r = " << c.r << " excluded: " << e.what() << '\n';
    }
  });
  sel.index = argmin_validation(sel.candidates);
  sel.r = sel.candidates[sel.index].r;
  return sel;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, std::span<const Bag> train_bags,
                            std::span<const Bag> val_bags, std::span<const Bag> test_bags) {
  metrics::Metadata pre_meta;
  pre_meta.method = "counting";
  TrainResult pre = train(cfg, train_bags, val_bags, test_bags, pre_meta);

  Report report;
  report.pretrain = pre.record;
  report.prototypes = build_prototypes(pre.model, train_bags);
  report.plan = score_bags(pre.model, train_bags, report.prototypes);

  Selection sel = select_r(cfg, report.plan, train_bags, val_bags, test_bags, cfg.r_grid);
  report.selected_index = sel.index;
  report.selected_r = sel.r;

  const int c = cfg.data.num_classes;
  for (std::size_t i = 0; i < sel.candidates.size(); ++i) {
    const RCandidate& cand = sel.candidates[i];
    RReport rr;
    rr.r = cand.r;
    rr.diverged = cand.diverged;
    const auto reduced = apply_removal(train_bags, report.plan, cand.r);
    const auto removed = removed_instances(train_bags, report.plan, cand.r);
    rr.removed = removed.size();
    rr.purity = metrics::purity(removed);
    rr.agreement_rate = metrics::agreement_rate(train_bags, reduced, c);
    std::vector<int> counts;
    for (const auto& p : report.plan) counts.push_back(static_cast<int>(p.removal_count(cand.r)));
    Rng rng = make_rng(cfg.seed, kRandomRemovalStream, i);
    const auto randomly = metrics::random_removal(train_bags, counts, rng);
    rr.random_agreement_rate = metrics::agreement_rate(train_bags, randomly, c);
    for (std::size_t b = 0; b < train_bags.size(); ++b) {
      ScatterPoint pt{train_bags[b].id, majority_proportion(train_bags[b]), std::nullopt};
      if (reduced[b].size() > 0) pt.after = majority_proportion(reduced[b]);
      rr.scatter.push_back(pt);
    }
    if (cand.record) {
      rr.val_losses = cand.record->val_losses;
      rr.min_val_loss = cand.min_val_loss();
      rr.best_epoch = cand.record->best_epoch;
      if (cand.record->metrics) {
        rr.test_metrics = *cand.record->metrics;
        rr.test_metrics->purity = rr.purity;
        rr.test_metrics->agreement_rate = rr.agreement_rate;
        rr.test_metrics->random_agreement_rate = rr.random_agreement_rate;
        rr.test_metrics->meta.r = rr.r;
      }
    } else {
      rr.min_val_loss = std::numeric_limits<double>::quiet_NaN();
    }
    report.per_r.push_back(std::move(rr));
  }

  report.selected = *sel.candidates[sel.index].record;
  Model final_model = std::move(*sel.candidates[sel.index].model);
  return {std::move(final_model), std::move(report)};
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const Dataset& ds) {
  return run_pipeline(cfg, ds.train, ds.validation, ds.test);
}

nlohmann::json to_json(const Report& report) {
  nlohmann::json protos = nlohmann::json::array();
  for (std::size_t k = 0; k < report.prototypes.prototypes.size(); ++k) {
    const auto& p = report.prototypes.prototypes[k];
    protos.push_back({{"class", k},
                      {"support", report.prototypes.support[k]},
                      {"prototype", p ? nlohmann::json(*p) : nlohmann::json(nullptr)}});
  }
  nlohmann::json plans = nlohmann::json::array();
  for (const auto& p : report.plan) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : p.candidates) cands.push_back({{"index", c.index}, {"distance", c.distance}});
    plans.push_back({{"bag_id", p.bag_id}, {"label", p.label}, {"skipped", p.skipped}, {"candidates", cands}});
  }
  nlohmann::json per_r = nlohmann::json::array();
  for (const auto& rr : report.per_r) {
    nlohmann::json scatter = nlohmann::json::array();
    for (const auto& s : rr.scatter) {
      scatter.push_back({{"bag_id", s.bag_id},
                         {"before", s.before},
                         {"after", s.after ? nlohmann::json(*s.after) : nlohmann::json(nullptr)}});
    }
    // per-bag removal list at this r
    nlohmann::json removal = nlohmann::json::array();
    for (const auto& p : report.plan) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < p.removal_count(rr.r); ++i) idx.push_back(p.candidates[i].index);
      removal.push_back({{"bag_id", p.bag_id}, {"removed", idx}});
    }
    per_r.push_back({{"r", rr.r},
                     {"diverged", rr.diverged},
                     {"val_losses", rr.val_losses},
                     {"min_val_loss", rr.diverged ? nlohmann::json(nullptr) : nlohmann::json(rr.min_val_loss)},
                     {"best_epoch", rr.best_epoch},
                     {"removed", rr.removed},
                     {"purity", rr.purity ? nlohmann::json(*rr.purity) : nlohmann::json(nullptr)},
                     {"agreement_rate", rr.agreement_rate},
                     {"random_agreement_rate", rr.random_agreement_rate},
                     {"test_metrics", rr.test_metrics ? metrics::to_json(*rr.test_metrics) : nlohmann::json(nullptr)},
                     {"removal_lists", removal},
                     {"proportion_scatter", scatter}});
  }
  return {{"format", "lml-mpem-report/1"},
          {"selected_r", report.selected_r},
          {"selected_index", report.selected_index},
          {"validation_bags_modified", false},
          {"prototypes_built", "once, from the pre-trained model"},
          {"pretrain", to_json(report.pretrain)},
          {"selected_run", to_json(report.selected)},
          {"prototypes", protos},
          {"plan", plans},
          {"per_r", per_r}};
}

std::vector<std::string> csv_rows(const Report& report) {
  std::vector<std::string> rows;
  for (const auto& rr : report.per_r) {
    metrics::MetricsReport m;
    if (rr.test_metrics) {
      m = *rr.test_metrics;
    } else {
      m.instance_accuracy = std::numeric_limits<double>::quiet_NaN();
      m.bag_accuracy = std::numeric_limits<double>::quiet_NaN();
      m.purity = rr.purity;
      m.agreement_rate = rr.agreement_rate;
      m.random_agreement_rate = rr.random_agreement_rate;
      m.meta.method = "counting+mpem";
      m.meta.r = rr.r;
    }
    m.meta.method = "counting+mpem";
    rows.push_back(metrics::csv_row(m));
  }
  return rows;
}

}  // namespace lml::mpem
