#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lml/autodiff.hpp"
#include "lml/bagsynth.hpp"
#include "lml/model.hpp"

namespace lml {

// Experiment configuration. Stored as a flat JSON object; see README for
// the key list. Unknown keys are rejected.
struct ExperimentConfig {
  DatasetConfig data;
  Method method = Method::Counting;
  std::vector<int> hidden{64, 64};
  std::string init = "uniform_fan_in";  // or "he_uniform"
  double t_inst = 0.1;
  double t_bag = 0.1;
  double pnorm_p = 3.0;
  double lse_r = 1.0;
  ad::AdamConfig adam;
  int epochs = 200;
  int batch_size = 16;
  int folds = 1;
  std::vector<double> r_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::uint64_t seed = 0;
  int jobs = 1;
  std::vector<std::string> sweep_scenarios{"small", "various", "large"};
  std::vector<std::string> sweep_methods{"counting", "output-mean"};

  void validate() const;
  void set_seed(std::uint64_t s);
  // Model spec for this method; the no-count ablation uses a unit instance
  // temperature.
  ModelSpec model_spec(int input_dim) const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Default output directory: $LML_OUT_DIR, else the current directory.
std::filesystem::path default_output_dir();

}  // namespace lml
