#pragma once

// Minimal tape-based reverse-mode automatic differentiation over dense,
// row-major 2-d arrays. Vectors are 1 x n tensors. The only broadcasting
// supported is the row-wise bias add.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace lml::ad {

struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> values);

  static Tensor row(std::vector<double> values);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return data.size(); }
  std::span<double> row_span(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row_span(std::size_t i) const { return {data.data() + i * cols, cols}; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_string() const;

  bool operator==(const Tensor&) const = default;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named trainable arrays with gradient slots and Adam moment estimates.
// Iteration order is the lexicographic order of names.
class ParameterStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
  };

  Entry& add(const std::string& name, Tensor value);
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }
  void increment_step() { ++step_; }

  void zero_grad();
  // Copies parameter values (not optimizer state) from another store with
  // identical layout.
  void copy_values_from(const ParameterStore& other);
  std::size_t num_scalars() const;

 private:
  std::map<std::string, Entry> entries_;
  std::uint64_t step_ = 0;
};

class Graph;

// Lightweight handle to a node owned by a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t id() const { return id_; }
  Graph* graph() const { return graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// The tape. Nodes are appended in creation order, which is a topological
// order of the computation graph.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    ParameterStore::Entry* bound = nullptr;
    std::size_t visits = 0;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a store entry; backward accumulates into entry.grad.
  Var param(ParameterStore& store, const std::string& name);
  // Non-trainable copy of a store entry.
  Var frozen(const ParameterStore& store, const std::string& name);

  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

  // Seeds d(out)/d(out) = 1 for a 1x1 output and propagates to every node
  // reachable from it.
  void backward(Var out);

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient buffer of a node, allocated lazily with the value's shape.
  Tensor& grad_of(std::size_t id);

 private:
  std::vector<Node> nodes_;
};

// Forward product; shape mismatch raises DimensionError.
Var matmul(Var a, Var b);
// a (m x n) plus row vector b (1 x n) added to every row.
Var add_bias(Var a, Var b);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
// Row-wise softmax of a / temperature.
Var softmax_rows(Var a, double temperature);
Var sum(Var a);
Var mean(Var a);

// Segment reductions over consecutive row ranges [offsets[i], offsets[i+1]).
// Output has one row per segment.
Var segment_sum(Var a, std::span<const std::size_t> offsets);
Var segment_mean(Var a, std::span<const std::size_t> offsets);
Var segment_max(Var a, std::span<const std::size_t> offsets);
// (mean |a|^p)^(1/p)
Var segment_pnorm(Var a, std::span<const std::size_t> offsets, double p);
// (1/r) log(mean exp(r a))
Var segment_lse(Var a, std::span<const std::size_t> offsets, double r);

// Mean over rows of -log(max(probs[i, labels[i]], clamp)).
Var cross_entropy_rows(Var probs, std::span<const int> labels, double clamp = 1e-12);

// Mean over rows of -log softmax(scores[i] / T)[labels[i]], evaluated in the
// log domain so it stays finite and differentiable where the probability
// underflows.
Var softmax_cross_entropy_rows(Var scores, std::span<const int> labels, double temperature);

// One Adam update on every entry using the accumulated gradients, then zeroes
// them. A non-finite gradient aborts the step before any entry is touched.
void adam_step(ParameterStore& store, const AdamConfig& cfg);

using ScalarBuilder = std::function<Var(Graph&, ParameterStore&)>;

// Maximum over all parameter scalars of |analytic - numeric| /
// max(|analytic|, |numeric|, floor), numeric from central differences.
double grad_check(const ScalarBuilder& fn, ParameterStore& params, double step,
                  double floor = 1e-6);

}  // namespace lml::ad
