#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "lml/baselines.hpp"
#include "lml/errors.hpp"

using namespace lml;

TEST_CASE("output mean averages instance probabilities") {
  ad::Tensor p(3, 3, {0.5, 0.4, 0.1, 0.1, 0.4, 0.5, 0.0, 0.0, 1.0});
  auto m = baselines::output_mean(p);
  CHECK(m[0] == doctest::Approx(0.2));
  CHECK(m[1] == doctest::Approx(0.8 / 3));
  CHECK(m[2] == doctest::Approx(1.6 / 3));
}

TEST_CASE("feature pooling operators") {
  ad::Tensor f(2, 2, {1.0, -2.0, 3.0, 4.0});
  CHECK(baselines::feature_pool(f, baselines::PoolingKind::mean()) == std::vector<double>{2.0, 1.0});
  CHECK(baselines::feature_pool(f, baselines::PoolingKind::max()) == std::vector<double>{3.0, 4.0});
  auto pn = baselines::feature_pool(f, baselines::PoolingKind::pnorm(3.0));
  CHECK(pn[0] == doctest::Approx(std::cbrt(14.0)));
  CHECK(pn[1] == doctest::Approx(std::cbrt(36.0)));
  auto lse = baselines::feature_pool(f, baselines::PoolingKind::lse(1e-4));
  CHECK(lse[0] == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(lse[1] == doctest::Approx(1.0).epsilon(1e-2));
  auto sharp = baselines::feature_pool(f, baselines::PoolingKind::lse(200.0));
  CHECK(sharp[1] == doctest::Approx(4.0).epsilon(1e-2));
}

TEST_CASE("pooling parameters are validated") {
  CHECK_THROWS_AS(baselines::PoolingKind::pnorm(0.5).validate(), ParameterError);
  CHECK_THROWS_AS(baselines::PoolingKind::lse(0.0).validate(), ParameterError);
  CHECK_NOTHROW(baselines::PoolingKind::pnorm(2.0).validate());
}

TEST_CASE("output mean prediction is the instance argmax") {
  Model m(testing::small_spec(Method::OutputMean));
  Bag b = testing::random_bag(1, 3, 3, 5);
  auto z = logits(m, b.instances);
  CHECK(baselines::instance_predict_baseline(m, b.instances.row_span(0)) == argmax(z.row_span(0)));
}

TEST_CASE("output mean forward sums to one") {
  Model m(testing::small_spec(Method::OutputMean));
  auto y = baselines::output_mean_forward(m, testing::random_bag(5, 3, 3, 8));
  double total = 0.0;
  for (double v : y) total += v;
  CHECK(total == doctest::Approx(1.0));
}
