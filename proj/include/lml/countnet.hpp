#pragma once

// Counting Network: pseudo-one-hot instance outputs via a low-temperature
// softmax, summed into a soft count vector, followed by a second
// temperature softmax acting as a differentiable argmax over the counts.

#include <span>
#include <vector>

#include "lml/autodiff.hpp"
#include "lml/bagsynth.hpp"
#include "lml/model.hpp"

namespace lml::countnet {

inline constexpr double kDefaultTemperature = 0.1;
inline constexpr double kLogClamp = 1e-12;

// s(z, T)_k = exp(z_k / T) / sum_l exp(z_l / T), evaluated with the max
// subtracted. Throws ParameterError for T <= 0.
std::vector<double> temperature_softmax(std::span<const double> z, double temperature);

// g(x_j, T_inst) for every instance, one row per instance.
ad::Tensor instance_forward(const Model& model, const Bag& bag);

// N^_k = sum_j g_jk
std::vector<double> soft_count(const ad::Tensor& instance_outputs);

// Y^ = s(N^, T_bag)
std::vector<double> bag_forward(std::span<const double> soft_counts, double t_bag);

// -sum_k Y_k log max(Y^_k, 1e-12). Y must be one-hot.
double bag_loss(std::span<const double> bag_output, std::span<const double> one_hot);

struct BagForwardTrace {
  ad::Tensor instance_outputs;
  std::vector<double> soft_counts;
  std::vector<double> bag_output;
  double loss = 0.0;
};

BagForwardTrace trace(const Model& model, const Bag& bag);

// Differentiable pieces over a batch of bags.
ad::Var instance_probabilities(const ParamBinder& p, const Batch& batch);
ad::Var bag_probabilities(const ParamBinder& p, const Batch& batch);
ad::Var batch_loss(const ParamBinder& p, const Batch& batch);

// argmax f(x); ties toward the lowest class index.
int predict_instance(const Model& model, std::span<const double> x);
std::vector<int> predict_instances(const Model& model, const Bag& bag);
// argmax of the hard per-instance counts; ties toward the lowest index.
int predict_bag(const Model& model, const Bag& bag);
std::vector<int> hard_counts(std::span<const int> predictions, int num_classes);

}  // namespace lml::countnet
