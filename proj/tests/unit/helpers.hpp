#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lml/bagsynth.hpp"
#include "lml/config.hpp"
#include "lml/model.hpp"

namespace testing {

inline lml::ModelSpec small_spec(lml::Method method, int dim = 3, int classes = 3, std::uint64_t seed = 7) {
  lml::ModelSpec s;
  s.method = method;
  s.input_dim = dim;
  s.hidden = {5, 4};
  s.num_classes = classes;
  s.seed = seed;
  if (method == lml::Method::CountingNoCount) s.t_inst = 1.0;
  return s;
}

inline lml::Bag random_bag(int size, int dim, int classes, std::uint64_t seed, int id = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  lml::Bag b;
  b.id = id;
  b.instances = lml::ad::Tensor(static_cast<std::size_t>(size), static_cast<std::size_t>(dim));
  for (double& x : b.instances.data) x = n(rng);
  for (int i = 0; i < size; ++i) b.hidden_labels.push_back(i % classes);
  b.label = 0;
  return b;
}

// Small, fast experiment: 2-d blobs, few bags, few epochs.
inline lml::ExperimentConfig tiny_config(std::uint64_t seed = 3) {
  lml::ExperimentConfig c;
  c.data.train_bags = 24;
  c.data.val_bags = 8;
  c.data.test_bags = 8;
  c.hidden = {8, 8};
  c.epochs = 3;
  c.batch_size = 8;
  c.adam.lr = 1e-2;
  c.set_seed(seed);
  return c;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lml_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
