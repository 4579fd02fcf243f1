#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lml/countnet.hpp"
#include "lml/errors.hpp"
#include "lml/metrics.hpp"

using namespace lml;

TEST_CASE("accuracies") {
  CHECK(metrics::instance_accuracy(std::vector<int>{0, 1, 2, 2}, std::vector<int>{0, 1, 1, 2}) == doctest::Approx(0.75));
  CHECK(metrics::bag_accuracy(std::vector<int>{1, 1}, std::vector<int>{1, 0}) == doctest::Approx(0.5));
  CHECK_THROWS(metrics::instance_accuracy(std::vector<int>{0}, std::vector<int>{0, 1}));
}

TEST_CASE("consistency counts only correctly aggregated bags") {
  std::vector<int> aggregated{0, 1, 2, 2};
  std::vector<int> counted{0, 2, 2, 1};
  std::vector<int> truth{0, 1, 2, 0};
  CHECK(metrics::consistency_rate(aggregated, counted, truth) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("consistency is undefined with no correct bag") {
  CHECK_THROWS_AS(metrics::consistency_rate(std::vector<int>{1}, std::vector<int>{1}, std::vector<int>{0}),
                  UndefinedMetricError);
}

TEST_CASE("proportion error sign") {
  Bag b;
  b.instances = ad::Tensor(5, 1);
  b.hidden_labels = {1, 1, 1, 0, 2};
  b.label = 1;
  CHECK(metrics::proportion_error(std::vector<int>{1, 1, 1, 1, 2}, b, 3) == doctest::Approx(0.2));
  CHECK(metrics::proportion_error(std::vector<int>{1, 0, 0, 0, 2}, b, 3) == doctest::Approx(-0.4));
}

TEST_CASE("purity and agreement") {
  std::vector<metrics::RemovedInstance> removed{{0, 1}, {1, 1}, {2, 1}, {2, 2}};
  CHECK(*metrics::purity(removed) == doctest::Approx(0.5));
  CHECK_FALSE(metrics::purity(std::vector<metrics::RemovedInstance>{}).has_value());

  Bag before;
  before.instances = ad::Tensor(4, 1);
  before.hidden_labels = {0, 0, 1, 1};
  before.label = 0;
  Bag kept = before;
  kept.instances = ad::Tensor(3, 1);
  kept.hidden_labels = {0, 0, 1};
  Bag tied = before;
  Bag flipped = before;
  flipped.instances = ad::Tensor(2, 1);
  flipped.hidden_labels = {1, 1};
  std::vector<Bag> b4{before, before, before};
  std::vector<Bag> after{kept, tied, flipped};
  CHECK(metrics::agreement_rate(b4, after, 2) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("random removal removes the requested counts") {
  std::vector<Bag> bags{testing::random_bag(6, 2, 3, 1), testing::random_bag(4, 2, 3, 2)};
  Rng rng = make_rng(0, 401);
  auto out = metrics::random_removal(bags, std::vector<int>{2, 4}, rng);
  CHECK(out[0].size() == 4);
  CHECK(out[0].hidden_labels.size() == 4);
  CHECK(out[1].size() == 0);
  CHECK(out[0].label == bags[0].label);
}

TEST_CASE("median") {
  CHECK(metrics::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(metrics::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("evaluate agrees with direct predictions") {
  Model m(testing::small_spec(Method::Counting));
  std::vector<Bag> bags;
  for (int i = 0; i < 5; ++i) {
    bags.push_back(testing::random_bag(6 + i, 3, 3, 30 + static_cast<std::uint64_t>(i), i));
    bags.back().label = i % 3;
  }
  auto report = metrics::evaluate(m, bags, {});
  int hits = 0, total = 0;
  for (const auto& b : bags) {
    auto preds = countnet::predict_instances(m, b);
    for (std::size_t j = 0; j < preds.size(); ++j, ++total) hits += preds[j] == b.hidden_labels[j];
  }
  CHECK(report.instance_accuracy == doctest::Approx(static_cast<double>(hits) / total));
  CHECK(report.proportion_errors.size() == bags.size());
}

TEST_CASE("metrics json and csv") {
  metrics::MetricsReport r;
  r.instance_accuracy = 0.1;
  r.bag_accuracy = 1.0 / 3.0;
  r.proportion_errors = {0.0, -0.1};
  r.meta.method = "counting";
  r.meta.scenario = "small";
  auto back = metrics::metrics_from_json(metrics::to_json(r));
  CHECK(back.bag_accuracy == r.bag_accuracy);
  CHECK_FALSE(back.consistency_rate.has_value());
  const std::string row = metrics::csv_row(r);
  const std::string header = metrics::csv_header();
  CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
  CHECK(row.find("0.33333333333333331") != std::string::npos);
}
