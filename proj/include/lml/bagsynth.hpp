#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lml/autodiff.hpp"

namespace lml {

using Rng = std::mt19937_64;

// Per-stream generator derived from (seed, stream, index).
Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

enum class ScenarioKind { Small, Various, Large };

std::string to_string(ScenarioKind kind);
ScenarioKind parse_scenario(const std::string& name);

// Interval of the majority-class proportion used when building bags.
struct Scenario {
  ScenarioKind kind = ScenarioKind::Various;
  int num_classes = 4;

  Scenario(ScenarioKind k, int c);

  double lower() const;
  double upper() const;
  bool lower_open() const { return kind != ScenarioKind::Large; }
  bool contains(double proportion) const;
};

// A labeled bag. `hidden_labels` are the true instance classes and are only
// read by evaluation code.
struct Bag {
  int id = 0;
  ad::Tensor instances;  // |B| x d
  int label = 0;         // index of the one-hot majority label Y
  std::vector<int> hidden_labels;

  std::size_t size() const { return instances.rows; }
  std::vector<double> one_hot(int num_classes) const;
};

// Labeled instance universe. Gaussian pools draw fresh samples; list pools
// sample without replacement within a bag.
class ClassPool {
 public:
  struct GaussianClass {
    std::vector<double> mean;
    std::vector<double> stddev;
  };

  static ClassPool gaussian(std::vector<GaussianClass> classes);
  // C isotropic blobs with means evenly spaced on a circle of `radius` in the
  // first two coordinates.
  static ClassPool gaussian_blobs(int num_classes, int dim, double radius, double sigma);
  // C isotropic blobs whose means point in random directions of R^dim, each
  // at distance `radius` from the origin.
  static ClassPool gaussian_random_blobs(int num_classes, int dim, double radius, double sigma, Rng& rng);
  static ClassPool from_lists(std::vector<std::vector<std::vector<double>>> classes);
  // One row per instance: d feature columns followed by an integer class label.
  static ClassPool from_csv(const std::filesystem::path& path);

  int num_classes() const { return num_classes_; }
  int dim() const { return dim_; }
  bool is_synthetic() const { return !gaussians_.empty(); }
  const std::vector<std::vector<std::vector<double>>>& lists() const { return lists_; }

  std::vector<std::vector<double>> sample(int cls, int count, Rng& rng) const;

 private:
  int num_classes_ = 0;
  int dim_ = 0;
  std::vector<GaussianClass> gaussians_;
  std::vector<std::vector<std::vector<double>>> lists_;
};

// N_k = number of instances whose hidden label is k.
std::vector<int> true_count_vector(const Bag& bag, int num_classes);

// Index of the unique maximum; throws AmbiguousMajorityError on a tie.
int majority_class(std::span<const int> counts);
std::vector<int> majority_label(std::span<const int> counts);

// Integer class counts summing to bag_size with a unique strict maximum at a
// uniformly drawn class. The majority count is uniform over the integers whose
// proportion lies inside the scenario interval; the remainder is split by a
// symmetric Dirichlet draw capped below the majority.
std::vector<int> sample_proportions(const Scenario& scenario, int bag_size, Rng& rng,
                                    double dirichlet_alpha = 1.0);

// Largest-remainder rounding of proportions onto integers summing to total.
std::vector<int> largest_remainder(std::span<const double> proportions, int total);

Bag make_bag(const ClassPool& pool, std::span<const int> counts, Rng& rng, int id = 0);

struct DatasetConfig {
  ScenarioKind scenario = ScenarioKind::Various;
  int num_classes = 4;
  int feature_dim = 2;
  int bag_size = 10;
  int bag_size_max = 0;  // > bag_size draws sizes uniformly from [bag_size, bag_size_max]
  int train_bags = 200;
  int val_bags = 50;
  int test_bags = 50;
  double blob_radius = 3.0;
  double blob_sigma = 1.0;
  std::string blob_layout = "circle";  // or "random"
  double dirichlet_alpha = 1.0;
  std::string pool_csv;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const DatasetConfig& cfg);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

struct Dataset {
  DatasetConfig config;
  std::vector<Bag> train;
  std::vector<Bag> validation;
  std::vector<Bag> test;
};

ClassPool make_pool(const DatasetConfig& cfg);
Dataset make_dataset(const DatasetConfig& cfg);
Dataset make_dataset(const DatasetConfig& cfg, const ClassPool& pool);
// `count` bags with ids first_id.. drawn from stream `stream`.
std::vector<Bag> make_bags(const DatasetConfig& cfg, const ClassPool& pool, std::uint64_t stream,
                           int count, int first_id = 0);

nlohmann::json to_json(const Bag& bag);
Bag bag_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Dataset& ds);
Dataset dataset_from_json(const nlohmann::json& j);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace lml
