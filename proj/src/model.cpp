#include "lml/model.hpp"

#include <cmath>

#include "lml/errors.hpp"

namespace lml {

namespace {
constexpr std::uint64_t kInitStream = 101;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Counting: return "counting";
    case Method::CountingNoCount: return "counting-no-count";
    case Method::OutputMean: return "output-mean";
    case Method::FeatureMean: return "feature-mean";
    case Method::FeatureMax: return "feature-max";
    case Method::FeaturePnorm: return "feature-pnorm";
    case Method::FeatureLse: return "feature-lse";
    case Method::CountingMpem: return "counting+mpem";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::Counting, Method::CountingNoCount, Method::OutputMean, Method::FeatureMean,
                   Method::FeatureMax, Method::FeaturePnorm, Method::FeatureLse, Method::CountingMpem}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

bool is_counting(Method m) {
  return m == Method::Counting || m == Method::CountingNoCount || m == Method::CountingMpem;
}

bool is_feature_pooling(Method m) {
  return m == Method::FeatureMean || m == Method::FeatureMax || m == Method::FeaturePnorm ||
         m == Method::FeatureLse;
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw ConfigError("model input dimension must be positive");
  if (num_classes < 2) throw ConfigError("model needs at least 2 classes");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden widths must be positive");
  if (!(t_inst > 0.0) || !(t_bag > 0.0)) throw ParameterError("temperatures must be positive");
  if (!(pnorm_p > 1.0) || !std::isfinite(pnorm_p)) throw ParameterError("p-norm exponent must be > 1");
  if (!(lse_r > 0.0) || !std::isfinite(lse_r)) throw ParameterError("LSE sharpness must be > 0");
  if (init != "he_uniform" && init != "uniform_fan_in") {
    throw ConfigError("unknown init scheme '" + init + "' (expected he_uniform or uniform_fan_in)");
  }
}

nlohmann::json to_json(const ModelSpec& s) {
  return {{"method", to_string(s.method)}, {"input_dim", s.input_dim},   {"hidden", s.hidden},
          {"num_classes", s.num_classes},  {"t_inst", s.t_inst},         {"t_bag", s.t_bag},
          {"pnorm_p", s.pnorm_p},          {"lse_r", s.lse_r},           {"seed", s.seed},
          {"init", s.init}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.method = parse_method(j.at("method").get<std::string>());
  s.input_dim = j.at("input_dim").get<int>();
  s.hidden = j.at("hidden").get<std::vector<int>>();
  s.num_classes = j.at("num_classes").get<int>();
  s.t_inst = j.at("t_inst").get<double>();
  s.t_bag = j.at("t_bag").get<double>();
  s.pnorm_p = j.at("pnorm_p").get<double>();
  s.lse_r = j.at("lse_r").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.init = j.value("init", std::string("uniform_fan_in"));
  return s;
}

// ---------------------------------------------------------------------------

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  int fan_in = spec_.input_dim;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const int fan_out = l < spec_.hidden.size() ? spec_.hidden[l] : spec_.num_classes;
    params_.add(weight_name(l), ad::Tensor(static_cast<std::size_t>(fan_in), static_cast<std::size_t>(fan_out)));
    params_.add(bias_name(l), ad::Tensor(1, static_cast<std::size_t>(fan_out)));
    fan_in = fan_out;
  }
  reinitialize();
}

std::string Model::weight_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".weight"; }
std::string Model::bias_name(std::size_t layer) { return "layer" + std::to_string(layer) + ".bias"; }

void Model::reinitialize() {
  Rng rng = make_rng(spec_.seed, kInitStream);
  for (std::size_t l = 0; l < num_layers(); ++l) {
    auto& w = params_.at(weight_name(l));
    auto& b = params_.at(bias_name(l));
    const double fan_in = static_cast<double>(w.value.rows);
    if (spec_.init == "he_uniform") {
      std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
      for (double& x : w.value.data) x = dist(rng);
      std::fill(b.value.data.begin(), b.value.data.end(), 0.0);
    } else {
      std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
      for (double& x : w.value.data) x = dist(rng);
      for (double& x : b.value.data) x = dist(rng);
    }
  }
  for (auto& [name, e] : params_.entries()) {
    std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
    std::fill(e.m.data.begin(), e.m.data.end(), 0.0);
    std::fill(e.v.data.begin(), e.v.data.end(), 0.0);
  }
  params_.set_step(0);
}

ad::Var ParamBinder::operator()(const std::string& name) const {
  if (mutable_ != nullptr) return graph_.param(mutable_->params(), name);
  return graph_.frozen(model_.params(), name);
}

// ---------------------------------------------------------------------------

Batch make_batch(std::span<const Bag* const> bags) {
  Batch batch;
  if (bags.empty()) throw DimensionError("batch needs at least one bag");
  const std::size_t d = bags.front()->instances.cols;
  std::size_t total = 0;
  for (const Bag* b : bags) {
    if (b->instances.cols != d && b->size() > 0) throw DimensionError("bags in a batch must share dimension");
    total += b->size();
  }
  batch.x = ad::Tensor(total, d);
  std::size_t row = 0;
  for (const Bag* b : bags) {
    std::copy(b->instances.data.begin(), b->instances.data.end(), batch.x.data.begin() + static_cast<std::ptrdiff_t>(row * d));
    row += b->size();
    batch.offsets.push_back(row);
    batch.labels.push_back(b->label);
  }
  return batch;
}

Batch make_batch(const Bag& bag) {
  const Bag* ptr = &bag;
  return make_batch(std::span<const Bag* const>(&ptr, 1));
}

ad::Var features(const ParamBinder& p, ad::Var x) {
  const Model& m = p.model();
  if (x.value().cols != static_cast<std::size_t>(m.spec().input_dim)) {
    throw DimensionError("input has " + std::to_string(x.value().cols) + " features, model expects " +
                         std::to_string(m.spec().input_dim));
  }
  ad::Var h = x;
  for (std::size_t l = 0; l + 1 < m.num_layers(); ++l) {
    h = ad::relu(ad::add_bias(ad::matmul(h, p(Model::weight_name(l))), p(Model::bias_name(l))));
  }
  return h;
}

ad::Var output_layer(const ParamBinder& p, ad::Var feats) {
  const std::size_t last = p.model().num_layers() - 1;
  return ad::add_bias(ad::matmul(feats, p(Model::weight_name(last))), p(Model::bias_name(last)));
}

ad::Var logits(const ParamBinder& p, ad::Var x) { return output_layer(p, features(p, x)); }

ad::Tensor logits(const Model& m, const ad::Tensor& x) {
  ad::Graph g;
  ParamBinder p(g, m);
  return logits(p, g.constant(x)).value();
}

ad::Tensor features(const Model& m, const ad::Tensor& x) {
  ad::Graph g;
  ParamBinder p(g, m);
  return features(p, g.constant(x)).value();
}

int argmax(std::span<const double> v) {
  int best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

int argmax(std::span<const int> v) {
  int best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

}  // namespace lml
