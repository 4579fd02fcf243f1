#pragma once

// Method dispatch: each method's aggregated bag output, loss and
// instance-level decision rule.

#include <span>
#include <vector>

#include "lml/autodiff.hpp"
#include "lml/bagsynth.hpp"
#include "lml/model.hpp"

namespace lml {

ad::Var bag_probabilities(const ParamBinder& p, const Batch& batch);
ad::Var batch_loss(const ParamBinder& p, const Batch& batch);

struct BagEvaluation {
  std::vector<int> instance_predictions;
  std::vector<double> bag_output;  // the method's aggregated bag output
  double loss = 0.0;
};

// Forward pass of a frozen model over many bags. Bags must be non-empty.
std::vector<BagEvaluation> evaluate_bags(const Model& model, std::span<const Bag> bags,
                                         std::size_t chunk = 256);

// Mean per-bag loss; empty bags are skipped.
double mean_bag_loss(const Model& model, std::span<const Bag> bags);

}  // namespace lml
