#include "lml/countnet.hpp"

#include <algorithm>
#include <cmath>

#include "lml/errors.hpp"

namespace lml::countnet {

std::vector<double> temperature_softmax(std::span<const double> z, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ParameterError("softmax temperature must be positive, got " + std::to_string(temperature));
  }
  if (z.empty()) return {};
  for (double v : z)
    if (!std::isfinite(v)) throw ParameterError("softmax input must be finite");
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double total = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    out[k] = std::exp((z[k] - mx) / temperature);
    total += out[k];
  }
  for (double& v : out) v /= total;
  return out;
}

ad::Tensor instance_forward(const Model& model, const Bag& bag) {
  if (bag.size() == 0) throw DimensionError("instance_forward on an empty bag");
  ad::Graph g;
  ParamBinder p(g, model);
  return instance_probabilities(p, make_batch(bag)).value();
}

std::vector<double> soft_count(const ad::Tensor& rows) {
  std::vector<double> n(rows.cols, 0.0);
  for (std::size_t i = 0; i < rows.rows; ++i)
    for (std::size_t k = 0; k < rows.cols; ++k) n[k] += rows(i, k);
  return n;
}

std::vector<double> bag_forward(std::span<const double> soft_counts, double t_bag) {
  return temperature_softmax(soft_counts, t_bag);
}

double bag_loss(std::span<const double> bag_output, std::span<const double> one_hot) {
  if (bag_output.size() != one_hot.size()) throw DimensionError("bag output and label lengths differ");
  int ones = 0;
  for (double y : one_hot) {
    if (y == 1.0) {
      ++ones;
    } else if (y != 0.0) {
      ones = -1;
      break;
    }
  }
  if (ones != 1) throw LabelError("bag label is not one-hot");
  double loss = 0.0;
  for (std::size_t k = 0; k < one_hot.size(); ++k)
    if (one_hot[k] == 1.0) loss -= std::log(std::max(bag_output[k], kLogClamp));
  return loss;
}

BagForwardTrace trace(const Model& model, const Bag& bag) {
  BagForwardTrace t;
  t.instance_outputs = instance_forward(model, bag);
  t.soft_counts = soft_count(t.instance_outputs);
  t.bag_output = bag_forward(t.soft_counts, model.spec().t_bag);
  t.loss = bag_loss(t.bag_output, bag.one_hot(model.spec().num_classes));
  return t;
}

ad::Var instance_probabilities(const ParamBinder& p, const Batch& batch) {
  ad::Var x = p.graph().constant(batch.x);
  return ad::softmax_rows(logits(p, x), p.model().spec().t_inst);
}

ad::Var bag_probabilities(const ParamBinder& p, const Batch& batch) {
  ad::Var counts = ad::segment_sum(instance_probabilities(p, batch), batch.offsets);
  return ad::softmax_rows(counts, p.model().spec().t_bag);
}

ad::Var batch_loss(const ParamBinder& p, const Batch& batch) {
  ad::Var counts = ad::segment_sum(instance_probabilities(p, batch), batch.offsets);
  return ad::softmax_cross_entropy_rows(counts, batch.labels, p.model().spec().t_bag);
}

int predict_instance(const Model& model, std::span<const double> x) {
  ad::Tensor row(1, x.size(), std::vector<double>(x.begin(), x.end()));
  const ad::Tensor z = logits(model, row);
  return argmax(z.row_span(0));
}

std::vector<int> predict_instances(const Model& model, const Bag& bag) {
  if (bag.size() == 0) return {};
  const ad::Tensor z = logits(model, bag.instances);
  std::vector<int> out(z.rows);
  for (std::size_t i = 0; i < z.rows; ++i) out[i] = argmax(z.row_span(i));
  return out;
}

std::vector<int> hard_counts(std::span<const int> predictions, int num_classes) {
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int c : predictions) ++counts.at(static_cast<std::size_t>(c));
  return counts;
}

int predict_bag(const Model& model, const Bag& bag) {
  const auto preds = predict_instances(model, bag);
  const auto counts = hard_counts(preds, model.spec().num_classes);
  return argmax(std::span<const int>(counts));
}

}  // namespace lml::countnet
