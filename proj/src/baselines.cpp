#include "lml/baselines.hpp"

#include <cmath>

#include "lml/countnet.hpp"
#include "lml/errors.hpp"

namespace lml::baselines {

PoolingKind PoolingKind::for_model(const ModelSpec& spec) {
  switch (spec.method) {
    case Method::OutputMean: return output_mean();
    case Method::FeatureMean: return mean();
    case Method::FeatureMax: return max();
    case Method::FeaturePnorm: return pnorm(spec.pnorm_p);
    case Method::FeatureLse: return lse(spec.lse_r);
    default: throw ConfigError("method " + lml::to_string(spec.method) + " is not a pooling baseline");
  }
}

void PoolingKind::validate() const {
  if (tag == Tag::FeaturePnorm && (!(p > 1.0) || !std::isfinite(p))) {
    throw ParameterError("p-norm exponent must be finite and > 1");
  }
  if (tag == Tag::FeatureLse && (!(r > 0.0) || !std::isfinite(r))) {
    throw ParameterError("LSE sharpness must be finite and > 0");
  }
}

std::string to_string(const PoolingKind& kind) {
  switch (kind.tag) {
    case PoolingKind::Tag::OutputMean: return "output-mean";
    case PoolingKind::Tag::FeatureMean: return "feature-mean";
    case PoolingKind::Tag::FeatureMax: return "feature-max";
    case PoolingKind::Tag::FeaturePnorm: return "feature-pnorm(p=" + std::to_string(kind.p) + ")";
    case PoolingKind::Tag::FeatureLse: return "feature-lse(r=" + std::to_string(kind.r) + ")";
  }
  return "unknown";
}

std::vector<double> output_mean(const ad::Tensor& instance_probs) {
  if (instance_probs.rows == 0) throw DimensionError("output mean of an empty bag");
  std::vector<double> out = countnet::soft_count(instance_probs);
  for (double& v : out) v /= static_cast<double>(instance_probs.rows);
  return out;
}

std::vector<double> output_mean_forward(const Model& model, const Bag& bag) {
  ad::Graph g;
  ParamBinder p(g, model);
  const ad::Tensor z = logits(p, g.constant(bag.instances)).value();
  ad::Tensor probs(z.rows, z.cols);
  for (std::size_t i = 0; i < z.rows; ++i) {
    const auto s = countnet::temperature_softmax(z.row_span(i), 1.0);
    std::copy(s.begin(), s.end(), probs.row_span(i).begin());
  }
  return output_mean(probs);
}

ad::Var pool_segments(ad::Var feats, std::span<const std::size_t> offsets, const PoolingKind& kind) {
  kind.validate();
  switch (kind.tag) {
    case PoolingKind::Tag::OutputMean:
    case PoolingKind::Tag::FeatureMean: return ad::segment_mean(feats, offsets);
    case PoolingKind::Tag::FeatureMax: return ad::segment_max(feats, offsets);
    case PoolingKind::Tag::FeaturePnorm: return ad::segment_pnorm(feats, offsets, kind.p);
    case PoolingKind::Tag::FeatureLse: return ad::segment_lse(feats, offsets, kind.r);
  }
  throw ConfigError("unknown pooling kind");
}

std::vector<double> feature_pool(const ad::Tensor& features, const PoolingKind& kind) {
  if (features.rows == 0) throw DimensionError("feature pooling needs at least one instance");
  ad::Graph g;
  const std::size_t offsets[] = {0, features.rows};
  const ad::Tensor out = pool_segments(g.constant(features), offsets, kind).value();
  return out.data;
}

ad::Var bag_probabilities(const ParamBinder& p, const Batch& batch) {
  const PoolingKind kind = PoolingKind::for_model(p.model().spec());
  ad::Var x = p.graph().constant(batch.x);
  if (kind.tag == PoolingKind::Tag::OutputMean) {
    return ad::segment_mean(ad::softmax_rows(logits(p, x), 1.0), batch.offsets);
  }
  ad::Var pooled = pool_segments(features(p, x), batch.offsets, kind);
  return ad::softmax_rows(output_layer(p, pooled), 1.0);
}

ad::Var batch_loss(const ParamBinder& p, const Batch& batch) {
  const PoolingKind kind = PoolingKind::for_model(p.model().spec());
  if (kind.tag == PoolingKind::Tag::OutputMean) {
    return ad::cross_entropy_rows(bag_probabilities(p, batch), batch.labels, countnet::kLogClamp);
  }
  ad::Var pooled = pool_segments(features(p, p.graph().constant(batch.x)), batch.offsets, kind);
  return ad::softmax_cross_entropy_rows(output_layer(p, pooled), batch.labels, 1.0);
}

int instance_predict_baseline(const Model& model, std::span<const double> x) {
  const ad::Tensor row(1, x.size(), std::vector<double>(x.begin(), x.end()));
  if (model.spec().method == Method::OutputMean || is_counting(model.spec().method)) {
    return countnet::predict_instance(model, x);
  }
  const PoolingKind kind = PoolingKind::for_model(model.spec());
  ad::Graph g;
  ParamBinder p(g, model);
  const std::size_t offsets[] = {0, 1};
  ad::Var pooled = pool_segments(features(p, g.constant(row)), offsets, kind);
  const ad::Tensor z = output_layer(p, pooled).value();
  return argmax(z.row_span(0));
}

}  // namespace lml::baselines
