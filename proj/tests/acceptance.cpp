// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Set LML_ACCEPTANCE_CONFIG to a JSON file to override the
// experiment settings of criteria 4-8.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lml/autodiff.hpp"
#include "lml/bagsynth.hpp"
#include "lml/baselines.hpp"
#include "lml/checkpoint.hpp"
#include "lml/config.hpp"
#include "lml/countnet.hpp"
#include "lml/errors.hpp"
#include "lml/experiment.hpp"
#include "lml/metrics.hpp"
#include "lml/model.hpp"
#include "lml/mpem.hpp"
#include "lml/train.hpp"

using namespace lml;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Outcome> outcomes;

void report(int id, bool pass, const std::string& detail) {
  outcomes.push_back({id, pass, detail});
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string fmt_e(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

const std::vector<std::uint64_t> kSeeds = {0, 1, 2};

ExperimentConfig experiment_base() {
  ExperimentConfig cfg;
  cfg.data.num_classes = 4;
  cfg.data.bag_size = 10;
  cfg.data.train_bags = 200;
  cfg.data.val_bags = 50;
  cfg.data.test_bags = 50;
  cfg.epochs = 200;
  if (const char* path = std::getenv("LML_ACCEPTANCE_CONFIG"); path != nullptr && *path != '\0') {
    nlohmann::json j = to_json(cfg);
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open ") + path);
    j.merge_patch(nlohmann::json::parse(in));
    cfg = config_from_json(j);
  }
  return cfg;
}

ExperimentConfig cell(ScenarioKind scenario, Method method, std::uint64_t seed) {
  ExperimentConfig cfg = experiment_base();
  cfg.data.scenario = scenario;
  cfg.method = method;
  cfg.set_seed(seed);
  cfg.validate();
  return cfg;
}

// Cached single-split runs keyed by (scenario, method, seed).
std::map<std::tuple<int, int, std::uint64_t>, RunRecord> run_cache;

const RunRecord& run(ScenarioKind scenario, Method method, std::uint64_t seed) {
  auto key = std::make_tuple(static_cast<int>(scenario), static_cast<int>(method), seed);
  auto it = run_cache.find(key);
  if (it != run_cache.end()) return it->second;
  const ExperimentConfig cfg = cell(scenario, method, seed);
  const Dataset ds = make_dataset(cfg.data);
  RunRecord rec = train(cfg, ds).record;
  std::printf("    run %-8s %-18s seed %llu: instance acc %s, best epoch %d (%.1fs)\n",
              to_string(scenario).c_str(), to_string(method).c_str(), static_cast<unsigned long long>(seed),
              fmt(rec.metrics->instance_accuracy).c_str(), rec.best_epoch, rec.wall_clock_seconds);
  std::fflush(stdout);
  return run_cache.emplace(key, std::move(rec)).first->second;
}

double mean_accuracy(ScenarioKind scenario, Method method) {
  std::vector<double> acc;
  for (auto s : kSeeds) acc.push_back(run(scenario, method, s).metrics->instance_accuracy);
  return mean_of(acc);
}

// ---------------------------------------------------------------------------
// 1. gradient correctness

void criterion_gradients() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(2024, 9001);
  std::uniform_int_distribution<int> dim_dist(1, 6), size_dist(1, 12), class_dist(2, 5), width_dist(2, 8);
  double worst_fused = 0.0, worst_clamped = 0.0;
  int clamped_active = 0;
  for (int trial = 0; trial < 50; ++trial) {
    ModelSpec spec;
    spec.method = Method::Counting;
    spec.input_dim = dim_dist(rng);
    spec.hidden = {width_dist(rng), width_dist(rng)};
    spec.num_classes = class_dist(rng);
    spec.seed = static_cast<std::uint64_t>(trial);
    Model model(spec);
    Bag bag;
    const int n = size_dist(rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    bag.instances = ad::Tensor(static_cast<std::size_t>(n), static_cast<std::size_t>(spec.input_dim));
    for (double& x : bag.instances.data) x = normal(rng);
    bag.label = std::uniform_int_distribution<int>(0, spec.num_classes - 1)(rng);
    bag.hidden_labels.assign(static_cast<std::size_t>(n), bag.label);
    const Batch batch = make_batch(bag);

    auto fused = [&](ad::Graph& g, ad::ParameterStore&) { return countnet::batch_loss(ParamBinder(g, model), batch); };
    auto composed = [&](ad::Graph& g, ad::ParameterStore&) {
      ParamBinder p(g, model);
      return ad::cross_entropy_rows(countnet::bag_probabilities(p, batch), batch.labels, countnet::kLogClamp);
    };
    worst_fused = std::max(worst_fused, ad::grad_check(fused, model.params(), 1e-5));
    {
      ad::Graph g;
      const double y = countnet::bag_probabilities(ParamBinder(g, std::as_const(model)), batch).value()(0, bag.label);
      if (y <= countnet::kLogClamp) ++clamped_active;
    }
    worst_clamped = std::max(worst_clamped, ad::grad_check(composed, model.params(), 1e-5));
  }
  const double elapsed = seconds_since(t0);
  const bool pass = worst_fused < 1e-3 && worst_clamped < 1e-3 && elapsed < 30.0;
  report(1, pass,
         "max relative error " + fmt_e(worst_fused) + " (training loss), " + fmt_e(worst_clamped) +
             " (clamped composition, clamp active in " + std::to_string(clamped_active) + "/50) over 50 pairs in " +
             fmt(elapsed, 2) + "s; need < 1e-3 and < 30s");
}

// ---------------------------------------------------------------------------
// 2. counting oracles

std::vector<double> oracle_mlp(const Model& m, std::span<const double> x) {
  std::vector<double> h(x.begin(), x.end());
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const auto& w = m.params().at(Model::weight_name(l)).value;
    const auto& b = m.params().at(Model::bias_name(l)).value;
    std::vector<double> out(w.cols, 0.0);
    for (std::size_t j = 0; j < w.cols; ++j) {
      double s = b.data[j];
      for (std::size_t i = 0; i < w.rows; ++i) s += h[i] * w.data[i * w.cols + j];
      out[j] = (l + 1 < m.num_layers()) ? std::max(0.0, s) : s;
    }
    h = std::move(out);
  }
  return h;
}

void criterion_counting() {
  Rng rng = make_rng(77, 9002);
  const int C = 5;
  ModelSpec spec;
  spec.input_dim = 3;
  spec.hidden = {16, 16};
  spec.num_classes = C;
  spec.seed = 5;
  const Model model(spec);
  const ClassPool pool = ClassPool::gaussian_blobs(C, 3, 3.0, 1.0);
  int mismatches = 0, bags = 0;
  for (const auto kind : {ScenarioKind::Small, ScenarioKind::Various, ScenarioKind::Large}) {
    const Scenario sc(kind, C);
    for (int i = 0; i < 334 && bags < 1000; ++i, ++bags) {
      const int size = std::uniform_int_distribution<int>(kind == ScenarioKind::Small ? 10 : 2, 30)(rng);
      const auto counts = sample_proportions(sc, size, rng);
      const Bag bag = make_bag(pool, counts, rng, bags);
      std::vector<int> tally(C, 0);
      for (int y : bag.hidden_labels) tally[static_cast<std::size_t>(y)] += 1;
      if (true_count_vector(bag, C) != tally) ++mismatches;
      int best = 0, ties = 0;
      for (int k = 1; k < C; ++k)
        if (tally[static_cast<std::size_t>(k)] > tally[static_cast<std::size_t>(best)]) best = k;
      for (int k = 0; k < C; ++k) ties += tally[static_cast<std::size_t>(k)] == tally[static_cast<std::size_t>(best)];
      std::vector<int> onehot(C, 0);
      onehot[static_cast<std::size_t>(best)] = 1;
      if (ties != 1 || majority_label(tally) != onehot || bag.label != best) ++mismatches;

      std::vector<int> pred_tally(C, 0);
      for (std::size_t j = 0; j < bag.size(); ++j) {
        const auto z = oracle_mlp(model, bag.instances.row_span(j));
        int arg = 0;
        for (int k = 1; k < C; ++k)
          if (z[static_cast<std::size_t>(k)] > z[static_cast<std::size_t>(arg)]) arg = k;
        pred_tally[static_cast<std::size_t>(arg)] += 1;
      }
      int pbest = 0;
      for (int k = 1; k < C; ++k)
        if (pred_tally[static_cast<std::size_t>(k)] > pred_tally[static_cast<std::size_t>(pbest)]) pbest = k;
      if (countnet::predict_bag(model, bag) != pbest) ++mismatches;
    }
  }
  report(2, mismatches == 0 && bags == 1000,
         std::to_string(bags) + " random bags, " + std::to_string(mismatches) +
             " mismatches against brute-force tallies (need 0)");
}

// ---------------------------------------------------------------------------
// 3. ambiguous summed confidences

void criterion_summed_confidence() {
  const ad::Tensor probs(2, 3, {0.5, 0.4, 0.1, 0.1, 0.4, 0.5});
  const auto sums = countnet::soft_count(probs);
  const bool sums_exact = sums == std::vector<double>{0.6, 0.8, 0.6};
  const auto mean = baselines::output_mean(probs);
  const int bag_argmax = argmax(mean);
  std::vector<int> hard(3, 0);
  for (std::size_t i = 0; i < probs.rows; ++i) hard[static_cast<std::size_t>(argmax(probs.row_span(i)))] += 1;
  bool ambiguous = false;
  try {
    majority_class(hard);
  } catch (const AmbiguousMajorityError&) {
    ambiguous = true;
  }
  report(3, sums_exact && bag_argmax == 1 && ambiguous,
         "summed confidences (" + fmt(sums[0], 17) + ", " + fmt(sums[1], 17) + ", " + fmt(sums[2], 17) +
             ") exact=" + (sums_exact ? "yes" : "no") + ", output-mean argmax " + std::to_string(bag_argmax) +
             ", hard counts (" + std::to_string(hard[0]) + "," + std::to_string(hard[1]) + "," +
             std::to_string(hard[2]) + ") ambiguous=" + (ambiguous ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 4-7. training experiments

void criterion_scenarios() {
  const auto t0 = Clock::now();
  const double small = mean_accuracy(ScenarioKind::Small, Method::Counting);
  const double various = mean_accuracy(ScenarioKind::Various, Method::Counting);
  const double large = mean_accuracy(ScenarioKind::Large, Method::Counting);
  const double elapsed = seconds_since(t0);
  const bool pass = large - various > 0.02 && various - small > 0.02 && elapsed < 600.0;
  report(4, pass,
         "counting instance accuracy Large " + fmt(large) + " > Various " + fmt(various) + " > Small " + fmt(small) +
             " (gaps " + fmt(large - various) + ", " + fmt(various - small) + "; need > 0.02 each) in " +
             fmt(elapsed, 1) + "s (need < 600s)");
}

void criterion_methods() {
  const double counting = mean_accuracy(ScenarioKind::Small, Method::Counting);
  const double output_mean = mean_accuracy(ScenarioKind::Small, Method::OutputMean);
  report(5, counting - output_mean > 0.05,
         "Small: counting " + fmt(counting) + " vs output-mean " + fmt(output_mean) + " (gap " +
             fmt(counting - output_mean) + "; need > 0.05)");
}

void criterion_consistency() {
  std::vector<double> with_count, without;
  for (auto s : kSeeds) {
    with_count.push_back(run(ScenarioKind::Various, Method::Counting, s).metrics->consistency_rate.value_or(0.0));
    without.push_back(run(ScenarioKind::Various, Method::CountingNoCount, s).metrics->consistency_rate.value_or(0.0));
  }
  const double a = mean_of(with_count), b = mean_of(without);
  report(6, a >= 0.95 && b < a,
         "Various consistency: counting " + fmt(a) + " (need >= 0.95), without count " + fmt(b) +
             " (need strictly lower)");
}

void criterion_overestimation() {
  std::vector<double> counting, output_mean;
  for (auto s : kSeeds) {
    const auto& a = run(ScenarioKind::Small, Method::Counting, s).metrics->proportion_errors;
    const auto& b = run(ScenarioKind::Small, Method::OutputMean, s).metrics->proportion_errors;
    counting.insert(counting.end(), a.begin(), a.end());
    output_mean.insert(output_mean.end(), b.begin(), b.end());
  }
  const double mc = metrics::median(counting), mo = metrics::median(output_mean);
  report(7, mo > mc,
         "Small median proportion error over " + std::to_string(counting.size()) + " test bags: output-mean " +
             fmt(mo) + " vs counting " + fmt(mc) + " (need output-mean > counting)");
}

// ---------------------------------------------------------------------------
// 8. MPEM

void criterion_mpem() {
  bool purity_ok = true, agreement_ok = true, random_ok = true, select_ok = true;
  std::vector<double> selected_acc, base_acc;
  std::string notes;
  for (auto s : kSeeds) {
    const ExperimentConfig cfg = cell(ScenarioKind::Various, Method::CountingMpem, s);
    const Dataset ds = make_dataset(cfg.data);
    const auto t0 = Clock::now();
    const auto res = mpem::run_pipeline(cfg, ds);
    const auto& rep = res.report;

    auto at = [&](double r) -> const mpem::RReport& {
      for (const auto& rr : rep.per_r)
        if (std::abs(rr.r - r) < 1e-9) return rr;
      throw ConfigError("r grid lacks " + fmt(r, 2));
    };
    const auto p03 = at(0.3).purity, p10 = at(1.0).purity;
    const bool pur = p03 && p10 && *p03 >= *p10;
    purity_ok = purity_ok && pur;
    double min_agree = 1.0;
    for (const auto& rr : rep.per_r) min_agree = std::min(min_agree, rr.agreement_rate);
    agreement_ok = agreement_ok && min_agree >= 0.95;
    const bool rnd = at(1.0).random_agreement_rate < at(1.0).agreement_rate;
    random_ok = random_ok && rnd;

    std::size_t argmin = 0;
    for (std::size_t i = 1; i < rep.per_r.size(); ++i)
      if (!rep.per_r[i].diverged && rep.per_r[i].min_val_loss < rep.per_r[argmin].min_val_loss) argmin = i;
    const bool sel = rep.selected_index == argmin && rep.selected_r == rep.per_r[argmin].r;
    select_ok = select_ok && sel;

    selected_acc.push_back(rep.per_r[rep.selected_index].test_metrics->instance_accuracy);
    base_acc.push_back(at(0.0).test_metrics->instance_accuracy);
    std::printf("    mpem seed %llu: selected r %.1f, purity(0.3) %s purity(1.0) %s, min agreement %s, "
                "random agreement(1.0) %s vs %s, acc %s vs r=0 %s (%.1fs)\n",
                static_cast<unsigned long long>(s), rep.selected_r, p03 ? fmt(*p03).c_str() : "n/a",
                p10 ? fmt(*p10).c_str() : "n/a", fmt(min_agree).c_str(), fmt(at(1.0).random_agreement_rate).c_str(),
                fmt(at(1.0).agreement_rate).c_str(), fmt(selected_acc.back()).c_str(),
                fmt(base_acc.back()).c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  const double sa = mean_of(selected_acc), ba = mean_of(base_acc);
  const bool acc_ok = sa >= ba - 0.01;
  report(8, purity_ok && agreement_ok && random_ok && select_ok && acc_ok,
         std::string("(a) purity(0.3) >= purity(1.0) on every seed: ") + (purity_ok ? "yes" : "no") +
             "; (b) MPEM agreement >= 0.95 at every r: " + (agreement_ok ? "yes" : "no") +
             ", random agreement at r=1 lower: " + (random_ok ? "yes" : "no") +
             "; (c) selected r is the validation argmin: " + (select_ok ? "yes" : "no") +
             "; (d) selected-r accuracy " + fmt(sa) + " vs r=0 " + fmt(ba) + " (need >= r=0 - 0.01)");
}

// ---------------------------------------------------------------------------
// 9. determinism and persistence

void criterion_determinism() {
  ExperimentConfig cfg = experiment_base();
  cfg.epochs = 20;
  cfg.data.train_bags = 40;
  cfg.data.val_bags = 10;
  cfg.data.test_bags = 10;
  cfg.sweep_methods = {"counting", "output-mean", "feature-mean", "counting+mpem"};
  cfg.r_grid = {0.0, 0.5, 1.0};
  cfg.set_seed(11);
  auto rows = [](const std::vector<metrics::MetricsReport>& reps) {
    std::vector<std::string> out;
    for (const auto& r : reps) out.push_back(metrics::csv_row(r));
    return out;
  };
  const auto first = rows(sweep(cfg));
  cfg.jobs = 2;
  const auto second = rows(sweep(cfg));
  const bool sweep_same = first == second && !first.empty();

  ExperimentConfig one = experiment_base();
  one.epochs = 15;
  one.data.train_bags = 30;
  one.set_seed(12);
  bool ckpt_same = true;
  const auto dir = std::filesystem::temp_directory_path() / "lml_acceptance";
  std::filesystem::create_directories(dir);
  for (Method m : {Method::Counting, Method::OutputMean, Method::FeaturePnorm}) {
    one.method = m;
    const Dataset ds = make_dataset(one.data);
    auto res = train(one, ds);
    const auto path = dir / (to_string(m) + ".ckpt");
    save_checkpoint(res.model, path);
    const Model loaded = load_checkpoint(path);
    const auto before = metrics::to_json(metrics::evaluate(res.model, ds.test)).dump();
    const auto after = metrics::to_json(metrics::evaluate(loaded, ds.test)).dump();
    ckpt_same = ckpt_same && before == after;
  }
  std::filesystem::remove_all(dir);
  report(9, sweep_same && ckpt_same,
         std::to_string(first.size()) + " sweep CSV rows identical with jobs=1 and jobs=2: " + (sweep_same ? "yes" : "no") +
             "; checkpoint round-trip metrics identical: " + (ckpt_same ? "yes" : "no"));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const std::vector<std::pair<int, std::function<void()>>> criteria = {
      {1, criterion_gradients},  {2, criterion_counting},    {3, criterion_summed_confidence},
      {4, criterion_scenarios},  {5, criterion_methods},     {6, criterion_consistency},
      {7, criterion_overestimation}, {8, criterion_mpem},    {9, criterion_determinism}};
  for (const auto& [id, fn] : criteria) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("error: ") + e.what());
    }
  }
  int failed = 0;
  for (const auto& o : outcomes) failed += o.pass ? 0 : 1;
  std::printf("%zu criteria, %d passed, %d failed (%.1fs)\n", outcomes.size(),
              static_cast<int>(outcomes.size()) - failed, failed, seconds_since(t0));
  return failed == 0 ? 0 : 1;
}
