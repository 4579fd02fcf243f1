#include "lml/heads.hpp"

#include <cmath>
#include <numeric>

#include "lml/baselines.hpp"
#include "lml/countnet.hpp"
#include "lml/errors.hpp"

namespace lml {

ad::Var bag_probabilities(const ParamBinder& p, const Batch& batch) {
  if (is_counting(p.model().spec().method)) return countnet::bag_probabilities(p, batch);
  return baselines::bag_probabilities(p, batch);
}

ad::Var batch_loss(const ParamBinder& p, const Batch& batch) {
  if (is_counting(p.model().spec().method)) return countnet::batch_loss(p, batch);
  return baselines::batch_loss(p, batch);
}

namespace {

// Per-instance class under the method's instance-level rule.
std::vector<int> instance_classes(const ParamBinder& p, ad::Var feats) {
  const ModelSpec& spec = p.model().spec();
  ad::Var z;
  if (is_feature_pooling(spec.method)) {
    // each instance pooled as a singleton bag, then the bag classifier
    std::vector<std::size_t> singleton(feats.value().rows + 1);
    std::iota(singleton.begin(), singleton.end(), 0);
    z = output_layer(p, baselines::pool_segments(feats, singleton, baselines::PoolingKind::for_model(spec)));
  } else {
    z = output_layer(p, feats);
  }
  const ad::Tensor& zv = z.value();
  std::vector<int> out(zv.rows);
  for (std::size_t i = 0; i < zv.rows; ++i) out[i] = argmax(zv.row_span(i));
  return out;
}

}  // namespace

std::vector<BagEvaluation> evaluate_bags(const Model& model, std::span<const Bag> bags, std::size_t chunk) {
  std::vector<BagEvaluation> out;
  out.reserve(bags.size());
  for (std::size_t start = 0; start < bags.size(); start += chunk) {
    const std::size_t stop = std::min(bags.size(), start + chunk);
    std::vector<const Bag*> ptrs;
    for (std::size_t i = start; i < stop; ++i) {
      if (bags[i].size() == 0) throw DimensionError("cannot evaluate empty bag " + std::to_string(bags[i].id));
      ptrs.push_back(&bags[i]);
    }
    const Batch batch = make_batch(ptrs);
    ad::Graph g;
    ParamBinder p(g, model);
    const ad::Tensor probs = bag_probabilities(p, batch).value();
    const std::vector<int> preds = instance_classes(p, features(p, g.constant(batch.x)));
    for (std::size_t b = 0; b < ptrs.size(); ++b) {
      BagEvaluation e;
      e.instance_predictions.assign(preds.begin() + static_cast<std::ptrdiff_t>(batch.offsets[b]),
                                    preds.begin() + static_cast<std::ptrdiff_t>(batch.offsets[b + 1]));
      auto row = probs.row_span(b);
      e.bag_output.assign(row.begin(), row.end());
      e.loss = -std::log(std::max(row[static_cast<std::size_t>(batch.labels[b])], countnet::kLogClamp));
      out.push_back(std::move(e));
    }
  }
  return out;
}

double mean_bag_loss(const Model& model, std::span<const Bag> bags) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t start = 0; start < bags.size(); start += 256) {
    std::vector<const Bag*> ptrs;
    for (std::size_t i = start; i < std::min(bags.size(), start + 256); ++i)
      if (bags[i].size() > 0) ptrs.push_back(&bags[i]);
    if (ptrs.empty()) continue;
    const Batch batch = make_batch(ptrs);
    ad::Graph g;
    ParamBinder p(g, model);
    total += batch_loss(p, batch).value().data[0] * static_cast<double>(ptrs.size());
    n += ptrs.size();
  }
  if (n == 0) throw UndefinedMetricError("mean loss over zero non-empty bags");
  return total / static_cast<double>(n);
}

}  // namespace lml
