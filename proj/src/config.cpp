#include "lml/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "lml/errors.hpp"

namespace lml {

void ExperimentConfig::validate() const {
  if (data.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (data.feature_dim < 1) throw ConfigError("feature_dim must be positive");
  if (data.blob_layout != "circle" && data.blob_layout != "random") {
    throw ConfigError("blob_layout must be circle or random");
  }
  if (data.bag_size < 2) throw ConfigError("bag_size must be >= 2");
  if (data.bag_size_max != 0 && data.bag_size_max < data.bag_size) {
    throw ConfigError("bag_size_max must be 0 or >= bag_size");
  }
  if (data.train_bags < 1 || data.val_bags < 1 || data.test_bags < 1) {
    throw ConfigError("bag counts per split must be positive");
  }
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (folds < 1) throw ConfigError("folds must be >= 1");
  if (r_grid.empty()) throw ConfigError("r_grid must not be empty");
  for (double r : r_grid)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("r_grid values must lie in [0, 1]");
  if (!(adam.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("eps must be positive");
  for (const auto& s : sweep_scenarios) parse_scenario(s);
  for (const auto& m : sweep_methods) parse_method(m);
  Scenario(data.scenario, data.num_classes);
  model_spec(data.feature_dim).validate();
}

void ExperimentConfig::set_seed(std::uint64_t s) {
  seed = s;
  data.seed = s;
}

ModelSpec ExperimentConfig::model_spec(int input_dim) const {
  ModelSpec s;
  s.method = method;
  s.input_dim = input_dim;
  s.hidden = hidden;
  s.num_classes = data.num_classes;
  s.t_inst = method == Method::CountingNoCount ? 1.0 : t_inst;
  s.t_bag = t_bag;
  s.pnorm_p = pnorm_p;
  s.lse_r = lse_r;
  s.seed = seed;
  s.init = init;
  return s;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c.data);
  j["method"] = to_string(c.method);
  j["hidden"] = c.hidden;
  j["init"] = c.init;
  j["t_inst"] = c.t_inst;
  j["t_bag"] = c.t_bag;
  j["pnorm_p"] = c.pnorm_p;
  j["lse_r"] = c.lse_r;
  j["lr"] = c.adam.lr;
  j["beta1"] = c.adam.beta1;
  j["beta2"] = c.adam.beta2;
  j["eps"] = c.adam.eps;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["folds"] = c.folds;
  j["r_grid"] = c.r_grid;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["sweep_scenarios"] = c.sweep_scenarios;
  j["sweep_methods"] = c.sweep_methods;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "scenario", "num_classes", "feature_dim", "bag_size",   "bag_size_max", "train_bags",  "val_bags",
      "test_bags", "blob_radius", "blob_sigma", "blob_layout", "dirichlet_alpha", "pool_csv", "method",     "hidden",
      "t_inst",   "t_bag",       "pnorm_p",    "lse_r",      "lr",           "beta1",       "beta2",
      "eps",      "epochs",      "batch_size", "folds",      "r_grid",       "seed",        "jobs",
      "init", "sweep_scenarios", "sweep_methods"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    auto& d = c.data;
    if (j.contains("scenario")) d.scenario = parse_scenario(j.at("scenario").get<std::string>());
    d.num_classes = j.value("num_classes", d.num_classes);
    d.feature_dim = j.value("feature_dim", d.feature_dim);
    d.bag_size = j.value("bag_size", d.bag_size);
    d.bag_size_max = j.value("bag_size_max", d.bag_size_max);
    d.train_bags = j.value("train_bags", d.train_bags);
    d.val_bags = j.value("val_bags", d.val_bags);
    d.test_bags = j.value("test_bags", d.test_bags);
    d.blob_radius = j.value("blob_radius", d.blob_radius);
    d.blob_sigma = j.value("blob_sigma", d.blob_sigma);
    d.blob_layout = j.value("blob_layout", d.blob_layout);
    d.dirichlet_alpha = j.value("dirichlet_alpha", d.dirichlet_alpha);
    d.pool_csv = j.value("pool_csv", d.pool_csv);
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    c.hidden = j.value("hidden", c.hidden);
    c.init = j.value("init", c.init);
    c.t_inst = j.value("t_inst", c.t_inst);
    c.t_bag = j.value("t_bag", c.t_bag);
    c.pnorm_p = j.value("pnorm_p", c.pnorm_p);
    c.lse_r = j.value("lse_r", c.lse_r);
    c.adam.lr = j.value("lr", c.adam.lr);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.eps = j.value("eps", c.adam.eps);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.folds = j.value("folds", c.folds);
    c.r_grid = j.value("r_grid", c.r_grid);
    c.set_seed(j.value("seed", c.seed));
    c.jobs = j.value("jobs", c.jobs);
    c.sweep_scenarios = j.value("sweep_scenarios", c.sweep_scenarios);
    c.sweep_methods = j.value("sweep_methods", c.sweep_methods);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("LML_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return std::filesystem::current_path();
}

}  // namespace lml
