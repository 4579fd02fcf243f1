#include "lml/bagsynth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "lml/errors.hpp"

namespace lml {

namespace {


constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kValidationStream = 2;
constexpr std::uint64_t kTestStream = 3;
constexpr std::uint64_t kMeansStream = 4;

// Caps every share at `cap`, redistributing the excess proportionally over
// the uncapped shares. Requires shares.size() * cap > sum(shares).
void water_fill(std::vector<double>& shares, double cap) {
  std::vector<char> fixed(shares.size(), 0);
  for (std::size_t round = 0; round < shares.size(); ++round) {
    double excess = 0.0;
    for (std::size_t i = 0; i < shares.size(); ++i) {
      if (!fixed[i] && shares[i] > cap) {
        excess += shares[i] - cap;
        shares[i] = cap;
        fixed[i] = 1;
      }
    }
    if (excess <= 0.0) return;
    double free_mass = 0.0;
    std::size_t free_count = 0;
    for (std::size_t i = 0; i < shares.size(); ++i) {
      if (!fixed[i]) {
        free_mass += shares[i];
        ++free_count;
      }
    }
    if (free_count == 0) return;
    for (std::size_t i = 0; i < shares.size(); ++i) {
      if (fixed[i]) continue;
      shares[i] += free_mass > 0.0 ? excess * shares[i] / free_mass
                                   : excess / static_cast<double>(free_count);
    }
  }
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Small: return "small";
    case ScenarioKind::Various: return "various";
    case ScenarioKind::Large: return "large";
  }
  return "unknown";
}

ScenarioKind parse_scenario(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "small") return ScenarioKind::Small;
  if (n == "various") return ScenarioKind::Various;
  if (n == "large") return ScenarioKind::Large;
  throw ConfigError("unknown scenario '" + name + "' (expected small, various or large)");
}

Scenario::Scenario(ScenarioKind k, int c) : kind(k), num_classes(c) {
  if (c < 2) throw ConfigError("scenario needs at least 2 classes, got " + std::to_string(c));
  if (k == ScenarioKind::Small && !(1.0 / c < 0.4)) {
    throw ConfigError("Small scenario requires 1/C < 0.4 (C >= 3), got C = " + std::to_string(c));
  }
}

double Scenario::lower() const {
  return kind == ScenarioKind::Large ? 0.6 : 1.0 / static_cast<double>(num_classes);
}

double Scenario::upper() const { return kind == ScenarioKind::Small ? 0.4 : 1.0; }

bool Scenario::contains(double p) const {
  const bool above = lower_open() ? p > lower() : p >= lower();
  return above && p <= upper();
}

std::vector<double> Bag::one_hot(int num_classes) const {
  std::vector<double> y(static_cast<std::size_t>(num_classes), 0.0);
  y.at(static_cast<std::size_t>(label)) = 1.0;
  return y;
}

// ---------------------------------------------------------------------------
// ClassPool

ClassPool ClassPool::gaussian(std::vector<GaussianClass> classes) {
  if (classes.empty()) throw ConfigError("gaussian pool needs at least one class");
  ClassPool pool;
  pool.num_classes_ = static_cast<int>(classes.size());
  pool.dim_ = static_cast<int>(classes.front().mean.size());
  for (const auto& c : classes) {
    if (static_cast<int>(c.mean.size()) != pool.dim_ || c.stddev.size() != c.mean.size()) {
      throw DimensionError("gaussian pool classes must share dimension " +
                           std::to_string(pool.dim_));
    }
  }
  pool.gaussians_ = std::move(classes);
  return pool;
}

ClassPool ClassPool::gaussian_blobs(int num_classes, int dim, double radius, double sigma) {
  if (dim < 1) throw ConfigError("feature dimension must be positive");
  std::vector<GaussianClass> classes;
  for (int k = 0; k < num_classes; ++k) {
    GaussianClass g;
    g.mean.assign(static_cast<std::size_t>(dim), 0.0);
    g.stddev.assign(static_cast<std::size_t>(dim), sigma);
    const double angle = 2.0 * std::numbers::pi * k / num_classes;
    g.mean[0] = radius * std::cos(angle);
    if (dim > 1) g.mean[1] = radius * std::sin(angle);
    classes.push_back(std::move(g));
  }
  return gaussian(std::move(classes));
}

ClassPool ClassPool::gaussian_random_blobs(int num_classes, int dim, double radius, double sigma, Rng& rng) {
  if (dim < 1) throw ConfigError("feature dimension must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<GaussianClass> classes;
  for (int k = 0; k < num_classes; ++k) {
    GaussianClass g;
    g.stddev.assign(static_cast<std::size_t>(dim), sigma);
    double norm = 0.0;
    while (norm < 1e-12) {
      g.mean.clear();
      norm = 0.0;
      for (int j = 0; j < dim; ++j) {
        g.mean.push_back(normal(rng));
        norm += g.mean.back() * g.mean.back();
      }
      norm = std::sqrt(norm);
    }
    for (double& m : g.mean) m *= radius / norm;
    classes.push_back(std::move(g));
  }
  return gaussian(std::move(classes));
}

ClassPool ClassPool::from_lists(std::vector<std::vector<std::vector<double>>> classes) {
  if (classes.empty()) throw ConfigError("pool needs at least one class");
  ClassPool pool;
  pool.num_classes_ = static_cast<int>(classes.size());
  pool.dim_ = -1;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (classes[k].empty()) {
      throw PoolExhaustedError("class " + std::to_string(k) + " has no instances in the pool");
    }
    for (const auto& x : classes[k]) {
      if (pool.dim_ < 0) pool.dim_ = static_cast<int>(x.size());
      if (static_cast<int>(x.size()) != pool.dim_) {
        throw DimensionError("pool vectors must share dimension " + std::to_string(pool.dim_));
      }
    }
  }
  pool.lists_ = std::move(classes);
  return pool;
}

ClassPool ClassPool::from_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pool file " + path.string());
  std::vector<std::vector<std::vector<double>>> classes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        fields.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (lineno == 1) continue;  // header
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    if (fields.size() < 2) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": need features and a label");
    }
    const double raw = fields.back();
    if (raw < 0 || raw != std::floor(raw)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad class label");
    }
    const auto cls = static_cast<std::size_t>(raw);
    fields.pop_back();
    if (classes.size() <= cls) classes.resize(cls + 1);
    classes[cls].push_back(std::move(fields));
  }
  return from_lists(std::move(classes));
}

std::vector<std::vector<double>> ClassPool::sample(int cls, int count, Rng& rng) const {
  if (cls < 0 || cls >= num_classes_) {
    throw PoolExhaustedError("class " + std::to_string(cls) + " is not in the pool");
  }
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(count));
  if (is_synthetic()) {
    const auto& g = gaussians_[static_cast<std::size_t>(cls)];
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
      std::vector<double> x(g.mean.size());
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = g.mean[j] + g.stddev[j] * normal(rng);
      out.push_back(std::move(x));
    }
    return out;
  }
  const auto& list = lists_[static_cast<std::size_t>(cls)];
  if (static_cast<std::size_t>(count) > list.size()) {
    throw PoolExhaustedError("requested " + std::to_string(count) + " instances of class " +
                             std::to_string(cls) + " but the pool holds " +
                             std::to_string(list.size()));
  }
  std::vector<std::size_t> idx(list.size());
  std::iota(idx.begin(), idx.end(), 0);
  // partial Fisher-Yates
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), idx.size() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[pick(rng)]);
    out.push_back(list[idx[static_cast<std::size_t>(i)]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Counting

std::vector<int> true_count_vector(const Bag& bag, int num_classes) {
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : bag.hidden_labels) {
    if (y < 0 || y >= num_classes) throw LabelError("hidden label out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

int majority_class(std::span<const int> counts) {
  if (counts.empty()) throw LabelError("majority of an empty count vector");
  int best = 0;
  bool tied = false;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 0) throw LabelError("negative count");
    if (k == 0) continue;
    if (counts[k] > counts[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(k);
      tied = false;
    } else if (counts[k] == counts[static_cast<std::size_t>(best)]) {
      tied = true;
    }
  }
  if (counts[static_cast<std::size_t>(best)] == 0) throw LabelError("all counts are zero");
  if (tied) throw AmbiguousMajorityError();
  return best;
}

std::vector<int> majority_label(std::span<const int> counts) {
  std::vector<int> y(counts.size(), 0);
  y[static_cast<std::size_t>(majority_class(counts))] = 1;
  return y;
}

std::vector<int> largest_remainder(std::span<const double> proportions, int total) {
  std::vector<int> counts(proportions.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t k = 0; k < proportions.size(); ++k) {
    const double exact = proportions[k] * total;
    counts[k] = static_cast<int>(std::floor(exact));
    assigned += counts[k];
    remainders.emplace_back(exact - counts[k], k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i, ++assigned) {
    ++counts[remainders[i].second];
  }
  return counts;
}

std::vector<int> sample_proportions(const Scenario& scenario, int bag_size, Rng& rng,
                                    double dirichlet_alpha) {
  if (bag_size < 2) throw ConfigError("bag size must be at least 2");
  const int c = scenario.num_classes;
  // majority counts m with m / |B| in the interval that leave room for every
  // other class to stay at or below m - 1
  std::vector<int> feasible;
  for (int m = 1; m <= bag_size; ++m) {
    if (scenario.contains(static_cast<double>(m) / bag_size) && (c - 1) * (m - 1) >= bag_size - m) {
      feasible.push_back(m);
    }
  }
  if (feasible.empty()) {
    throw InfeasibleScenarioError("infeasible scenario/bag-size: " + to_string(scenario.kind) +
                                  " with C = " + std::to_string(c) +
                                  ", bag size = " + std::to_string(bag_size));
  }
  const int major = std::uniform_int_distribution<int>(0, c - 1)(rng);
  const int m = feasible[std::uniform_int_distribution<std::size_t>(0, feasible.size() - 1)(rng)];
  const int rest = bag_size - m;

  std::gamma_distribution<double> gamma(dirichlet_alpha, 1.0);
  std::vector<double> others(static_cast<std::size_t>(c - 1));
  double total = 0.0;
  for (double& w : others) {
    w = gamma(rng);
    total += w;
  }
  for (double& w : others) w = total > 0.0 ? w / total : 1.0 / (c - 1);
  if (rest > 0) {
    const double cap = static_cast<double>(m - 1) / rest;
    water_fill(others, cap);
  }
  std::vector<int> rest_counts = largest_remainder(others, rest);
  for (;;) {
    auto over = std::find_if(rest_counts.begin(), rest_counts.end(), [&](int n) { return n > m - 1; });
    if (over == rest_counts.end()) break;
    --*over;
    ++*std::min_element(rest_counts.begin(), rest_counts.end());
  }

  std::vector<int> counts(static_cast<std::size_t>(c));
  for (int k = 0, o = 0; k < c; ++k) {
    counts[static_cast<std::size_t>(k)] = k == major ? m : rest_counts[static_cast<std::size_t>(o++)];
  }
  return counts;
}

Bag make_bag(const ClassPool& pool, std::span<const int> counts, Rng& rng, int id) {
  if (static_cast<int>(counts.size()) != pool.num_classes()) {
    throw DimensionError("count vector has " + std::to_string(counts.size()) +
                         " classes, pool has " + std::to_string(pool.num_classes()));
  }
  std::vector<std::pair<std::vector<double>, int>> items;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    for (auto& x : pool.sample(static_cast<int>(k), counts[k], rng)) {
      items.emplace_back(std::move(x), static_cast<int>(k));
    }
  }
  std::shuffle(items.begin(), items.end(), rng);

  Bag bag;
  bag.id = id;
  bag.label = majority_class(counts);
  const auto d = static_cast<std::size_t>(pool.dim());
  bag.instances = ad::Tensor(items.size(), d);
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::copy(items[i].first.begin(), items[i].first.end(), bag.instances.row_span(i).begin());
    bag.hidden_labels.push_back(items[i].second);
  }
  return bag;
}

// ---------------------------------------------------------------------------
// Datasets

nlohmann::json to_json(const DatasetConfig& cfg) {
  return {{"scenario", to_string(cfg.scenario)},
          {"num_classes", cfg.num_classes},
          {"feature_dim", cfg.feature_dim},
          {"bag_size", cfg.bag_size},
          {"bag_size_max", cfg.bag_size_max},
          {"train_bags", cfg.train_bags},
          {"val_bags", cfg.val_bags},
          {"test_bags", cfg.test_bags},
          {"blob_radius", cfg.blob_radius},
          {"blob_sigma", cfg.blob_sigma},
          {"blob_layout", cfg.blob_layout},
          {"dirichlet_alpha", cfg.dirichlet_alpha},
          {"pool_csv", cfg.pool_csv},
          {"seed", cfg.seed}};
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
  DatasetConfig cfg;
  cfg.scenario = parse_scenario(j.at("scenario").get<std::string>());
  cfg.num_classes = j.at("num_classes").get<int>();
  cfg.feature_dim = j.at("feature_dim").get<int>();
  cfg.bag_size = j.at("bag_size").get<int>();
  cfg.bag_size_max = j.value("bag_size_max", 0);
  cfg.train_bags = j.at("train_bags").get<int>();
  cfg.val_bags = j.at("val_bags").get<int>();
  cfg.test_bags = j.at("test_bags").get<int>();
  cfg.blob_radius = j.value("blob_radius", 3.0);
  cfg.blob_sigma = j.value("blob_sigma", 1.0);
  cfg.blob_layout = j.value("blob_layout", std::string("circle"));
  cfg.dirichlet_alpha = j.value("dirichlet_alpha", 1.0);
  cfg.pool_csv = j.value("pool_csv", std::string());
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

ClassPool make_pool(const DatasetConfig& cfg) {
  if (!cfg.pool_csv.empty()) {
    ClassPool pool = ClassPool::from_csv(cfg.pool_csv);
    if (pool.num_classes() != cfg.num_classes || pool.dim() != cfg.feature_dim) {
      throw ConfigError("pool file has " + std::to_string(pool.num_classes()) + " classes of dimension " +
                        std::to_string(pool.dim()) + ", config expects " +
                        std::to_string(cfg.num_classes) + " x " + std::to_string(cfg.feature_dim));
    }
    return pool;
  }
  if (cfg.blob_layout == "random") {
    Rng rng = make_rng(cfg.seed, kMeansStream);
    return ClassPool::gaussian_random_blobs(cfg.num_classes, cfg.feature_dim, cfg.blob_radius, cfg.blob_sigma, rng);
  }
  if (cfg.blob_layout != "circle") {
    throw ConfigError("unknown blob_layout '" + cfg.blob_layout + "' (expected circle or random)");
  }
  return ClassPool::gaussian_blobs(cfg.num_classes, cfg.feature_dim, cfg.blob_radius, cfg.blob_sigma);
}

std::vector<Bag> make_bags(const DatasetConfig& cfg, const ClassPool& pool, std::uint64_t stream,
                           int count, int first_id) {
  const Scenario scenario(cfg.scenario, cfg.num_classes);
  std::vector<Bag> bags;
  bags.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int id = first_id + i;
    Rng rng = make_rng(cfg.seed, stream, static_cast<std::uint64_t>(id));
    int size = cfg.bag_size;
    if (cfg.bag_size_max > cfg.bag_size) {
      size = std::uniform_int_distribution<int>(cfg.bag_size, cfg.bag_size_max)(rng);
    }
    const auto counts = sample_proportions(scenario, size, rng, cfg.dirichlet_alpha);
    bags.push_back(make_bag(pool, counts, rng, id));
  }
  return bags;
}

Dataset make_dataset(const DatasetConfig& cfg) { return make_dataset(cfg, make_pool(cfg)); }

Dataset make_dataset(const DatasetConfig& cfg, const ClassPool& pool) {
  if (cfg.train_bags < 1 || cfg.val_bags < 1 || cfg.test_bags < 1) {
    throw ConfigError("every split needs at least one bag");
  }
  Dataset ds;
  ds.config = cfg;
  ds.train = make_bags(cfg, pool, kTrainStream, cfg.train_bags, 0);
  ds.validation = make_bags(cfg, pool, kValidationStream, cfg.val_bags, cfg.train_bags);
  ds.test = make_bags(cfg, pool, kTestStream, cfg.test_bags, cfg.train_bags + cfg.val_bags);
  return ds;
}

nlohmann::json to_json(const Bag& bag) {
  nlohmann::json inst = nlohmann::json::array();
  for (std::size_t i = 0; i < bag.size(); ++i) {
    auto r = bag.instances.row_span(i);
    inst.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"id", bag.id}, {"label", bag.label}, {"hidden_labels", bag.hidden_labels}, {"instances", inst}};
}

Bag bag_from_json(const nlohmann::json& j) {
  Bag bag;
  bag.id = j.at("id").get<int>();
  bag.label = j.at("label").get<int>();
  bag.hidden_labels = j.at("hidden_labels").get<std::vector<int>>();
  const auto rows = j.at("instances").get<std::vector<std::vector<double>>>();
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  bag.instances = ad::Tensor(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw DimensionError("bag " + std::to_string(bag.id) + ": ragged instances");
    std::copy(rows[i].begin(), rows[i].end(), bag.instances.row_span(i).begin());
  }
  if (bag.hidden_labels.size() != rows.size()) {
    throw DimensionError("bag " + std::to_string(bag.id) + ": label count differs from instance count");
  }
  return bag;
}

nlohmann::json to_json(const Dataset& ds) {
  auto split = [](const std::vector<Bag>& bags) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& b : bags) a.push_back(to_json(b));
    return a;
  };
  return {{"format", "lml-dataset/1"},
          {"config", to_json(ds.config)},
          {"train", split(ds.train)},
          {"validation", split(ds.validation)},
          {"test", split(ds.test)}};
}

Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset ds;
  ds.config = dataset_config_from_json(j.at("config"));
  for (const auto& b : j.at("train")) ds.train.push_back(bag_from_json(b));
  for (const auto& b : j.at("validation")) ds.validation.push_back(bag_from_json(b));
  for (const auto& b : j.at("test")) ds.test.push_back(bag_from_json(b));
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file " + path.string());
  out << to_json(ds).dump() << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  try {
    return dataset_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed dataset file " + path.string() + ": " + e.what());
  }
}

}  // namespace lml
