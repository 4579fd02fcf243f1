#pragma once

// Conventional MIL aggregation: averaging instance softmax outputs, or
// pooling instance features ahead of a bag-level linear classifier.

#include <span>
#include <string>
#include <vector>

#include "lml/autodiff.hpp"
#include "lml/model.hpp"

namespace lml::baselines {

struct PoolingKind {
  enum class Tag { OutputMean, FeatureMean, FeatureMax, FeaturePnorm, FeatureLse };

  Tag tag = Tag::FeatureMean;
  double p = 3.0;  // p-norm exponent
  double r = 1.0;  // LSE sharpness

  static PoolingKind output_mean() { return {Tag::OutputMean}; }
  static PoolingKind mean() { return {Tag::FeatureMean}; }
  static PoolingKind max() { return {Tag::FeatureMax}; }
  static PoolingKind pnorm(double p = 3.0) { return {Tag::FeaturePnorm, p}; }
  static PoolingKind lse(double r = 1.0) { return {Tag::FeatureLse, 3.0, r}; }
  static PoolingKind for_model(const ModelSpec& spec);

  void validate() const;
};

std::string to_string(const PoolingKind& kind);

// Mean over instances of softmax(f(x_j)).
std::vector<double> output_mean(const ad::Tensor& instance_probs);
std::vector<double> output_mean_forward(const Model& model, const Bag& bag);

// Pools a |B| x h feature matrix into one row of width h.
std::vector<double> feature_pool(const ad::Tensor& features, const PoolingKind& kind);
ad::Var pool_segments(ad::Var feats, std::span<const std::size_t> offsets, const PoolingKind& kind);

ad::Var bag_probabilities(const ParamBinder& p, const Batch& batch);
ad::Var batch_loss(const ParamBinder& p, const Batch& batch);

// Output-mean: argmax of the instance softmax. Feature pooling: the bag
// classifier applied to the pooled singleton bag {x}.
int instance_predict_baseline(const Model& model, std::span<const double> x);

}  // namespace lml::baselines
