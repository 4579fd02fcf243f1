#include "lml/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lml/errors.hpp"

namespace lml::ad {

Tensor::Tensor(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw DimensionError("tensor data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_string());
  }
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(1, n, std::move(values));
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

// ---------------------------------------------------------------------------
// ParameterStore

ParameterStore::Entry& ParameterStore::add(const std::string& name, Tensor value) {
  if (entries_.count(name)) throw ParameterError("duplicate parameter '" + name + "'");
  Entry e;
  e.grad = Tensor(value.rows, value.cols);
  e.m = Tensor(value.rows, value.cols);
  e.v = Tensor(value.rows, value.cols);
  e.value = std::move(value);
  return entries_.emplace(name, std::move(e)).first->second;
}

ParameterStore::Entry& ParameterStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ParameterError("unknown parameter '" + name + "'");
  return it->second;
}

const ParameterStore::Entry& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ParameterError("unknown parameter '" + name + "'");
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [name, e] : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  for (auto& [name, e] : entries_) {
    const Entry& src = other.at(name);
    if (!src.value.same_shape(e.value)) {
      throw DimensionError("parameter '" + name + "' shape " + e.value.shape_string() +
                           " vs " + src.value.shape_string());
    }
    e.value = src.value;
  }
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

// ---------------------------------------------------------------------------
// Graph

const Tensor& Var::value() const { return graph_->node(id_).value; }
const Tensor& Var::grad() const { return graph_->grad_of(id_); }

Var Graph::constant(Tensor value) { return record(std::move(value), {}, nullptr); }

Var Graph::param(ParameterStore& store, const std::string& name) {
  auto& entry = store.at(name);
  Var v = record(entry.value, {}, nullptr);
  nodes_[v.id()].bound = &entry;
  return v;
}

Var Graph::frozen(const ParameterStore& store, const std::string& name) {
  return constant(store.at(name).value);
}

Var Graph::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad.same_shape(n.value)) n.grad = Tensor(n.value.rows, n.value.cols);
  return n.grad;
}

void Graph::backward(Var out) {
  if (out.graph() != this) throw ParameterError("backward on a variable from another graph");
  const Tensor& v = nodes_[out.id()].value;
  if (v.rows != 1 || v.cols != 1) {
    throw DimensionError("backward requires a scalar output, got " + v.shape_string());
  }
  std::vector<char> reachable(out.id() + 1, 0);
  reachable[out.id()] = 1;
  for (std::size_t i = out.id() + 1; i-- > 0;) {
    if (!reachable[i]) continue;
    for (std::size_t p : nodes_[i].parents) reachable[p] = 1;
  }
  grad_of(out.id()).data[0] = 1.0;
  for (std::size_t i = out.id() + 1; i-- > 0;) {
    if (!reachable[i]) continue;
    Node& n = nodes_[i];
    ++n.visits;
    if (n.backward) {
      for (std::size_t p : n.parents) grad_of(p);
      grad_of(i);
      n.backward(*this, i);
    }
    if (n.bound != nullptr) {
      Tensor& g = grad_of(i);
      auto& dst = n.bound->grad.data;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g.data[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Primitive ops

namespace {

Graph& graph_of(Var a, Var b) {
  if (a.graph() == nullptr || a.graph() != b.graph()) {
    throw ParameterError("operands belong to different graphs");
  }
  return *a.graph();
}

void check_offsets(const Tensor& a, std::span<const std::size_t> offsets) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != a.rows) {
    throw DimensionError("segment offsets must start at 0 and end at row count " +
                         std::to_string(a.rows));
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (offsets[i] < offsets[i - 1]) throw DimensionError("segment offsets must be non-decreasing");
  }
}

void require_nonempty_segments(std::span<const std::size_t> offsets, const char* op) {
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (offsets[i] == offsets[i - 1]) {
      throw DimensionError(std::string(op) + ": empty segment " + std::to_string(i - 1));
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols != B.rows) {
    throw DimensionError("matmul: inner dimensions disagree, " + A.shape_string() + " x " +
                         B.shape_string());
  }
  const std::size_t m = A.rows, k = A.cols, n = B.cols;
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A.data[i * k + p];
      if (av == 0.0) continue;
      const double* br = B.data.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Graph& gr, std::size_t self) {
    const Tensor& G = gr.node(self).grad;
    const Tensor& Av = gr.node(ia).value;
    const Tensor& Bv = gr.node(ib).value;
    // dA = G * B^T
    Tensor& dA = gr.grad_of(ia);
    for (std::size_t i = 0; i < m; ++i) {
      const double* gr_row = G.data.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double* br = Bv.data.data() + p * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += gr_row[j] * br[j];
        dA.data[i * k + p] += s;
      }
    }
    // dB = A^T * G
    Tensor& dB = gr.grad_of(ib);
    for (std::size_t i = 0; i < m; ++i) {
      const double* gr_row = G.data.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = Av.data[i * k + p];
        if (av == 0.0) continue;
        double* db = dB.data.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) db[j] += av * gr_row[j];
      }
    }
  });
}

Var add_bias(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (B.rows != 1 || B.cols != A.cols) {
    throw DimensionError("add_bias: bias " + B.shape_string() + " does not fit " +
                         A.shape_string());
  }
  Tensor out = A;
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < A.cols; ++j) out(i, j) += B.data[j];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    const Tensor& G = gr.node(self).grad;
    Tensor& dA = gr.grad_of(ia);
    Tensor& dB = gr.grad_of(ib);
    for (std::size_t i = 0; i < G.rows; ++i)
      for (std::size_t j = 0; j < G.cols; ++j) {
        dA(i, j) += G(i, j);
        dB.data[j] += G(i, j);
      }
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("add: shapes " + a.value().shape_string() + " and " +
                         b.value().shape_string());
  }
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += b.value().data[k];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    const Tensor& G = gr.node(self).grad;
    Tensor& dA = gr.grad_of(ia);
    Tensor& dB = gr.grad_of(ib);
    for (std::size_t k = 0; k < G.size(); ++k) {
      dA.data[k] += G.data[k];
      dB.data[k] += G.data[k];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("mul: shapes " + a.value().shape_string() + " and " +
                         b.value().shape_string());
  }
  Tensor out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= b.value().data[k];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    const Tensor& G = gr.node(self).grad;
    const Tensor& Av = gr.node(ia).value;
    const Tensor& Bv = gr.node(ib).value;
    Tensor& dA = gr.grad_of(ia);
    Tensor& dB = gr.grad_of(ib);
    for (std::size_t k = 0; k < G.size(); ++k) {
      dA.data[k] += G.data[k] * Bv.data[k];
      dB.data[k] += G.data[k] * Av.data[k];
    }
  });
}

Var scale(Var a, double s) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (double& x : out.data) x *= s;
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, s](Graph& gr, std::size_t self) {
    const Tensor& G = gr.node(self).grad;
    Tensor& dA = gr.grad_of(ia);
    for (std::size_t k = 0; k < G.size(); ++k) dA.data[k] += s * G.data[k];
  });
}

Var relu(Var a) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (double& x : out.data) x = x > 0.0 ? x : 0.0;
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia](Graph& gr, std::size_t self) {
    const Tensor& G = gr.node(self).grad;
    const Tensor& X = gr.node(ia).value;
    Tensor& dA = gr.grad_of(ia);
    for (std::size_t k = 0; k < G.size(); ++k)
      if (X.data[k] > 0.0) dA.data[k] += G.data[k];
  });
}

Var softmax_rows(Var a, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ParameterError("softmax temperature must be positive and finite, got " +
                         std::to_string(temperature));
  }
  Graph& g = *a.graph();
  const Tensor& A = a.value();
  Tensor out(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    auto in = A.row_span(i);
    auto o = out.row_span(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < A.cols; ++j) {
      o[j] = std::exp((in[j] - mx) / temperature);
      total += o[j];
    }
    for (double& x : o) x /= total;
  }
  const std::size_t ia = a.id();
  const double inv_t = 1.0 / temperature;
  return g.record(std::move(out), {ia}, [ia, inv_t](Graph& gr, std::size_t self) {
    const Tensor& G = gr.node(self).grad;
    const Tensor& S = gr.node(self).value;
    Tensor& dA = gr.grad_of(ia);
    for (std::size_t i = 0; i < S.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < S.cols; ++j) dot += G(i, j) * S(i, j);
      for (std::size_t j = 0; j < S.cols; ++j) dA(i, j) += inv_t * S(i, j) * (G(i, j) - dot);
    }
  });
}

Var sum(Var a) {
  Graph& g = *a.graph();
  double s = 0.0;
  for (double x : a.value().data) s += x;
  const std::size_t ia = a.id();
  return g.record(Tensor::scalar(s), {ia}, [ia](Graph& gr, std::size_t self) {
    const double G = gr.node(self).grad.data[0];
    for (double& d : gr.grad_of(ia).data) d += G;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var segment_sum(Var a, std::span<const std::size_t> offsets) {
  const Tensor& A = a.value();
  check_offsets(A, offsets);
  const std::size_t nseg = offsets.size() - 1;
  Tensor out(nseg, A.cols);
  for (std::size_t s = 0; s < nseg; ++s)
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i)
      for (std::size_t j = 0; j < A.cols; ++j) out(s, j) += A(i, j);
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  const std::size_t ia = a.id();
  return a.graph()->record(std::move(out), {ia}, [ia, off](Graph& gr, std::size_t self) {
    const Tensor& G = gr.node(self).grad;
    Tensor& dA = gr.grad_of(ia);
    for (std::size_t s = 0; s + 1 < off.size(); ++s)
      for (std::size_t i = off[s]; i < off[s + 1]; ++i)
        for (std::size_t j = 0; j < G.cols; ++j) dA(i, j) += G(s, j);
  });
}

Var segment_mean(Var a, std::span<const std::size_t> offsets) {
  const Tensor& A = a.value();
  check_offsets(A, offsets);
  require_nonempty_segments(offsets, "segment_mean");
  const std::size_t nseg = offsets.size() - 1;
  Tensor out(nseg, A.cols);
  for (std::size_t s = 0; s < nseg; ++s) {
    const double inv = 1.0 / static_cast<double>(offsets[s + 1] - offsets[s]);
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i)
      for (std::size_t j = 0; j < A.cols; ++j) out(s, j) += A(i, j);
    for (std::size_t j = 0; j < A.cols; ++j) out(s, j) *= inv;
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  const std::size_t ia = a.id();
  return a.graph()->record(std::move(out), {ia}, [ia, off](Graph& gr, std::size_t self) {
    const Tensor& G = gr.node(self).grad;
    Tensor& dA = gr.grad_of(ia);
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      const double inv = 1.0 / static_cast<double>(off[s + 1] - off[s]);
      for (std::size_t i = off[s]; i < off[s + 1]; ++i)
        for (std::size_t j = 0; j < G.cols; ++j) dA(i, j) += inv * G(s, j);
    }
  });
}

Var segment_max(Var a, std::span<const std::size_t> offsets) {
  const Tensor& A = a.value();
  check_offsets(A, offsets);
  require_nonempty_segments(offsets, "segment_max");
  const std::size_t nseg = offsets.size() - 1;
  Tensor out(nseg, A.cols);
  // argmax row per (segment, column); first index on ties
  std::vector<std::size_t> arg(nseg * A.cols);
  for (std::size_t s = 0; s < nseg; ++s)
    for (std::size_t j = 0; j < A.cols; ++j) {
      std::size_t best = offsets[s];
      for (std::size_t i = offsets[s] + 1; i < offsets[s + 1]; ++i)
        if (A(i, j) > A(best, j)) best = i;
      arg[s * A.cols + j] = best;
      out(s, j) = A(best, j);
    }
  const std::size_t ia = a.id();
  return a.graph()->record(std::move(out), {ia}, [ia, arg](Graph& gr, std::size_t self) {
    const Tensor& G = gr.node(self).grad;
    Tensor& dA = gr.grad_of(ia);
    for (std::size_t s = 0; s < G.rows; ++s)
      for (std::size_t j = 0; j < G.cols; ++j) dA(arg[s * G.cols + j], j) += G(s, j);
  });
}

Var segment_pnorm(Var a, std::span<const std::size_t> offsets, double p) {
  if (!(p > 1.0) || !std::isfinite(p)) {
    throw ParameterError("p-norm exponent must be finite and > 1, got " + std::to_string(p));
  }
  const Tensor& A = a.value();
  check_offsets(A, offsets);
  require_nonempty_segments(offsets, "segment_pnorm");
  const std::size_t nseg = offsets.size() - 1;
  Tensor out(nseg, A.cols);
  Tensor means(nseg, A.cols);
  for (std::size_t s = 0; s < nseg; ++s) {
    const double inv = 1.0 / static_cast<double>(offsets[s + 1] - offsets[s]);
    for (std::size_t j = 0; j < A.cols; ++j) {
      double acc = 0.0;
      for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) acc += std::pow(std::abs(A(i, j)), p);
      means(s, j) = acc * inv;
      out(s, j) = std::pow(means(s, j), 1.0 / p);
    }
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  const std::size_t ia = a.id();
  return a.graph()->record(
      std::move(out), {ia}, [ia, off, means, p](Graph& gr, std::size_t self) {
        const Tensor& G = gr.node(self).grad;
        const Tensor& X = gr.node(ia).value;
        Tensor& dA = gr.grad_of(ia);
        for (std::size_t s = 0; s + 1 < off.size(); ++s) {
          const double inv = 1.0 / static_cast<double>(off[s + 1] - off[s]);
          for (std::size_t j = 0; j < G.cols; ++j) {
            const double mu = means(s, j);
            if (mu <= 0.0) continue;
            const double outer = std::pow(mu, 1.0 / p - 1.0) * inv;
            for (std::size_t i = off[s]; i < off[s + 1]; ++i) {
              const double x = X(i, j);
              if (x == 0.0) continue;
              const double sgn = x > 0.0 ? 1.0 : -1.0;
              dA(i, j) += G(s, j) * outer * std::pow(std::abs(x), p - 1.0) * sgn;
            }
          }
        }
      });
}

Var segment_lse(Var a, std::span<const std::size_t> offsets, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw ParameterError("LSE sharpness must be finite and > 0, got " + std::to_string(r));
  }
  const Tensor& A = a.value();
  check_offsets(A, offsets);
  require_nonempty_segments(offsets, "segment_lse");
  const std::size_t nseg = offsets.size() - 1;
  Tensor out(nseg, A.cols);
  Tensor weights(A.rows, A.cols);
  for (std::size_t s = 0; s < nseg; ++s) {
    const double n = static_cast<double>(offsets[s + 1] - offsets[s]);
    for (std::size_t j = 0; j < A.cols; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) mx = std::max(mx, A(i, j));
      double acc = 0.0;
      for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
        weights(i, j) = std::exp(r * (A(i, j) - mx));
        acc += weights(i, j);
      }
      for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) weights(i, j) /= acc;
      out(s, j) = mx + std::log(acc / n) / r;
    }
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  const std::size_t ia = a.id();
  return a.graph()->record(std::move(out), {ia}, [ia, off, weights](Graph& gr, std::size_t self) {
    const Tensor& G = gr.node(self).grad;
    Tensor& dA = gr.grad_of(ia);
    for (std::size_t s = 0; s + 1 < off.size(); ++s)
      for (std::size_t i = off[s]; i < off[s + 1]; ++i)
        for (std::size_t j = 0; j < G.cols; ++j) dA(i, j) += G(s, j) * weights(i, j);
  });
}

Var cross_entropy_rows(Var probs, std::span<const int> labels, double clamp) {
  const Tensor& P = probs.value();
  if (labels.size() != P.rows) {
    throw DimensionError("cross_entropy_rows: " + std::to_string(labels.size()) +
                         " labels for " + P.shape_string());
  }
  if (P.rows == 0) throw DimensionError("cross_entropy_rows: no rows");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= P.cols) {
      throw LabelError("label " + std::to_string(y) + " out of range for " +
                       std::to_string(P.cols) + " classes");
    }
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < P.rows; ++i) loss -= std::log(std::max(P(i, labels[i]), clamp));
  loss /= static_cast<double>(P.rows);
  std::vector<int> y(labels.begin(), labels.end());
  const std::size_t ip = probs.id();
  return probs.graph()->record(Tensor::scalar(loss), {ip}, [ip, y, clamp](Graph& gr, std::size_t self) {
    const double G = gr.node(self).grad.data[0];
    const Tensor& Pv = gr.node(ip).value;
    Tensor& dP = gr.grad_of(ip);
    const double inv = 1.0 / static_cast<double>(Pv.rows);
    for (std::size_t i = 0; i < Pv.rows; ++i) {
      const double p = Pv(i, y[i]);
      if (p > clamp) dP(i, y[i]) -= G * inv / p;
    }
  });
}

Var softmax_cross_entropy_rows(Var scores, std::span<const int> labels, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ParameterError("softmax temperature must be positive and finite, got " +
                         std::to_string(temperature));
  }
  const Tensor& A = scores.value();
  if (labels.size() != A.rows) {
    throw DimensionError("softmax_cross_entropy_rows: " + std::to_string(labels.size()) +
                         " labels for " + A.shape_string());
  }
  if (A.rows == 0) throw DimensionError("softmax_cross_entropy_rows: no rows");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= A.cols) {
      throw LabelError("label " + std::to_string(y) + " out of range for " +
                       std::to_string(A.cols) + " classes");
    }
  }
  Tensor probs(A.rows, A.cols);
  double loss = 0.0;
  for (std::size_t i = 0; i < A.rows; ++i) {
    auto in = A.row_span(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < A.cols; ++j) {
      probs(i, j) = std::exp((in[j] - mx) / temperature);
      total += probs(i, j);
    }
    for (std::size_t j = 0; j < A.cols; ++j) probs(i, j) /= total;
    loss += std::log(total) - (in[static_cast<std::size_t>(labels[i])] - mx) / temperature;
  }
  loss /= static_cast<double>(A.rows);
  std::vector<int> y(labels.begin(), labels.end());
  const std::size_t ia = scores.id();
  const double inv_t = 1.0 / temperature;
  return scores.graph()->record(
      Tensor::scalar(loss), {ia}, [ia, y, inv_t, probs = std::move(probs)](Graph& gr, std::size_t self) {
        const double G = gr.node(self).grad.data[0] / static_cast<double>(probs.rows);
        Tensor& dA = gr.grad_of(ia);
        for (std::size_t i = 0; i < probs.rows; ++i) {
          for (std::size_t j = 0; j < probs.cols; ++j) {
            const double target = static_cast<int>(j) == y[i] ? 1.0 : 0.0;
            dA(i, j) += G * inv_t * (probs(i, j) - target);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Optimizer and gradient checking

void adam_step(ParameterStore& store, const AdamConfig& cfg) {
  for (const auto& [name, e] : store.entries()) {
    for (double g : e.grad.data) {
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in parameter '" + name + "'");
    }
  }
  store.increment_step();
  const double t = static_cast<double>(store.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, e] : store.entries()) {
    for (std::size_t k = 0; k < e.value.size(); ++k) {
      const double g = e.grad.data[k];
      e.m.data[k] = cfg.beta1 * e.m.data[k] + (1.0 - cfg.beta1) * g;
      e.v.data[k] = cfg.beta2 * e.v.data[k] + (1.0 - cfg.beta2) * g * g;
      const double mhat = e.m.data[k] / c1;
      const double vhat = e.v.data[k] / c2;
      e.value.data[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  store.zero_grad();
}

double grad_check(const ScalarBuilder& fn, ParameterStore& params, double step, double floor) {
  params.zero_grad();
  {
    Graph g;
    Var out = fn(g, params);
    g.backward(out);
  }
  auto eval = [&]() {
    Graph g;
    return fn(g, params).value().data[0];
  };
  double worst = 0.0;
  for (auto& [name, e] : params.entries()) {
    for (std::size_t k = 0; k < e.value.size(); ++k) {
      const double original = e.value.data[k];
      e.value.data[k] = original + step;
      const double fp = eval();
      e.value.data[k] = original - step;
      const double fm = eval();
      e.value.data[k] = original;
      const double numeric = (fp - fm) / (2.0 * step);
      const double analytic = e.grad.data[k];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  params.zero_grad();
  return worst;
}

}  // namespace lml::ad
