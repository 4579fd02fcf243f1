#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lml/autodiff.hpp"
#include "lml/bagsynth.hpp"

namespace lml {

enum class Method {
  Counting,
  CountingNoCount,  // standard softmax on instances, temperature softmax over summed confidences
  OutputMean,
  FeatureMean,
  FeatureMax,
  FeaturePnorm,
  FeatureLse,
  CountingMpem,  // Counting Network retrained on MPEM-reduced bags
};

std::string to_string(Method m);
Method parse_method(const std::string& name);
bool is_counting(Method m);
bool is_feature_pooling(Method m);

struct ModelSpec {
  Method method = Method::Counting;
  int input_dim = 2;
  std::vector<int> hidden{64, 64};
  int num_classes = 4;
  double t_inst = 0.1;
  double t_bag = 0.1;
  double pnorm_p = 3.0;
  double lse_r = 1.0;
  std::uint64_t seed = 0;
  std::string init = "uniform_fan_in";

  void validate() const;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

// MLP f: d -> hidden... -> C with ReLU between layers. The feature extractor
// is the same network truncated before the output layer.
class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  ad::ParameterStore& params() { return params_; }
  const ad::ParameterStore& params() const { return params_; }

  int feature_width() const { return spec_.hidden.empty() ? spec_.input_dim : spec_.hidden.back(); }
  std::size_t num_layers() const { return spec_.hidden.size() + 1; }

  static std::string weight_name(std::size_t layer);
  static std::string bias_name(std::size_t layer);

  // Fresh uniform fan-in initialization drawn from spec().seed.
  void reinitialize();

 private:
  ModelSpec spec_;
  ad::ParameterStore params_;
};

// Binds model parameters into a graph either as trainable leaves or as
// frozen constants.
class ParamBinder {
 public:
  ParamBinder(ad::Graph& g, Model& m) : graph_(g), mutable_(&m), model_(m) {}
  ParamBinder(ad::Graph& g, const Model& m) : graph_(g), model_(m) {}

  ad::Var operator()(const std::string& name) const;
  ad::Graph& graph() const { return graph_; }
  const Model& model() const { return model_; }

 private:
  ad::Graph& graph_;
  Model* mutable_ = nullptr;
  const Model& model_;
};

// Stacked instances of several bags; bag b owns rows [offsets[b], offsets[b+1]).
struct Batch {
  ad::Tensor x;
  std::vector<std::size_t> offsets{0};
  std::vector<int> labels;

  std::size_t num_bags() const { return labels.size(); }
};

Batch make_batch(std::span<const Bag* const> bags);
Batch make_batch(const Bag& bag);

// Penultimate activations f~(x).
ad::Var features(const ParamBinder& p, ad::Var x);
// Output-layer logits given features.
ad::Var output_layer(const ParamBinder& p, ad::Var feats);
// Logits f(x).
ad::Var logits(const ParamBinder& p, ad::Var x);

// Plain evaluation helpers on a frozen model.
ad::Tensor logits(const Model& m, const ad::Tensor& x);
ad::Tensor features(const Model& m, const ad::Tensor& x);

// Index of the maximum, lowest index on ties.
int argmax(std::span<const double> v);
int argmax(std::span<const int> v);

}  // namespace lml
