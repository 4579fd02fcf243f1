#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lml/countnet.hpp"
#include "lml/errors.hpp"
#include "lml/mpem.hpp"

using namespace lml;

namespace {

std::vector<Bag> labeled_bags(const Model& m, int n) {
  std::vector<Bag> bags;
  for (int i = 0; i < n; ++i) {
    Bag b = testing::random_bag(8, 3, 3, 100 + static_cast<std::uint64_t>(i), i);
    b.label = countnet::predict_bag(m, b);
    bags.push_back(b);
  }
  return bags;
}

mpem::RCandidate candidate(double r, std::vector<double> losses, bool diverged = false) {
  mpem::RCandidate c;
  c.r = r;
  c.diverged = diverged;
  if (!diverged) {
    RunRecord rec;
    rec.val_losses = std::move(losses);
    rec.best_epoch = static_cast<int>(std::min_element(rec.val_losses.begin(), rec.val_losses.end()) - rec.val_losses.begin());
    c.record = rec;
  }
  return c;
}

}  // namespace

TEST_CASE("prototypes are mean features of agreeing instances") {
  Model m(testing::small_spec(Method::Counting));
  auto bags = labeled_bags(m, 6);
  auto protos = mpem::build_prototypes(m, bags);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> sum(static_cast<std::size_t>(m.feature_width()), 0.0);
    int n = 0;
    for (const auto& b : bags) {
      if (b.label != c) continue;
      auto preds = countnet::predict_instances(m, b);
      auto f = features(m, b.instances);
      for (std::size_t j = 0; j < preds.size(); ++j) {
        if (preds[j] != c) continue;
        ++n;
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += f(j, k);
      }
    }
    CHECK(protos.support[static_cast<std::size_t>(c)] == n);
    CHECK(protos.has(c) == (n > 0));
    if (n > 0)
      for (std::size_t k = 0; k < sum.size(); ++k) CHECK((*protos.prototypes[static_cast<std::size_t>(c)])[k] == doctest::Approx(sum[k] / n));
  }
}

TEST_CASE("removal plan ranks minority predictions by distance") {
  Model m(testing::small_spec(Method::Counting));
  auto bags = labeled_bags(m, 6);
  auto protos = mpem::build_prototypes(m, bags);
  auto plan = mpem::score_bags(m, bags, protos);
  REQUIRE(plan.size() == bags.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& p = plan[i];
    if (p.skipped) continue;
    auto preds = countnet::predict_instances(m, bags[i]);
    CHECK(p.candidates.size() == static_cast<std::size_t>(std::count_if(preds.begin(), preds.end(), [&](int y) { return y != p.label; })));
    for (std::size_t k = 1; k < p.candidates.size(); ++k) CHECK(p.candidates[k - 1].distance >= p.candidates[k].distance);
    for (const auto& c : p.candidates) CHECK(preds[c.index] != p.label);
  }
}

TEST_CASE("removal count floors r times m") {
  mpem::BagPlan p;
  p.candidates.resize(7);
  CHECK(p.removal_count(0.0) == 0);
  CHECK(p.removal_count(0.3) == 2);
  CHECK(p.removal_count(1.0) == 7);
  p.candidates.resize(10);
  CHECK(p.removal_count(0.3) == 3);
}

TEST_CASE("apply removal keeps labels and shrinks monotonically") {
  Model m(testing::small_spec(Method::Counting));
  auto bags = labeled_bags(m, 6);
  auto plan = mpem::score_bags(m, bags, mpem::build_prototypes(m, bags));
  auto none = mpem::apply_removal(bags, plan, 0.0);
  for (std::size_t i = 0; i < bags.size(); ++i) CHECK(none[i].instances == bags[i].instances);
  std::size_t prev = 0;
  for (double r : {0.0, 0.5, 1.0}) {
    auto out = mpem::apply_removal(bags, plan, r);
    std::size_t removed = 0;
    for (std::size_t i = 0; i < bags.size(); ++i) {
      CHECK(out[i].label == bags[i].label);
      CHECK(out[i].hidden_labels.size() == out[i].size());
      removed += bags[i].size() - out[i].size();
    }
    CHECK(removed == mpem::removed_instances(bags, plan, r).size());
    CHECK(removed >= prev);
    prev = removed;
  }
}

TEST_CASE("selection picks the minimum validation loss, smaller r on ties") {
  std::vector<mpem::RCandidate> c{candidate(0.0, {2.0, 1.5}), candidate(0.1, {2.0, 1.2}), candidate(0.2, {1.2, 1.3}),
                                  candidate(0.3, {}, true)};
  CHECK(mpem::argmin_validation(c) == 1);
  std::vector<mpem::RCandidate> dead{candidate(0.0, {}, true)};
  CHECK_THROWS(mpem::argmin_validation(dead));
}

TEST_CASE("pipeline reports every r and tests the selected model on the full test split") {
  auto cfg = testing::tiny_config();
  cfg.method = Method::CountingMpem;
  cfg.r_grid = {0.0, 1.0};
  const Dataset ds = make_dataset(cfg.data);
  auto result = mpem::run_pipeline(cfg, ds);
  REQUIRE(result.report.per_r.size() == 2);
  CHECK((result.report.selected_r == 0.0 || result.report.selected_r == 1.0));
  REQUIRE(result.report.selected.metrics.has_value());
  CHECK(metrics::evaluate(result.model, ds.test).instance_accuracy == result.report.selected.metrics->instance_accuracy);
  CHECK(mpem::csv_rows(result.report).size() == 2);
}
