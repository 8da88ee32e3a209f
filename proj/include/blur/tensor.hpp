#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "blur/error.hpp"

namespace blur {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major real tensor with a gradient buffer of the same size.
// Handles share the underlying node, so an op's backward closure can hold
// its inputs and outputs cheaply.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor from(Shape shape, std::vector<double> data);
  static Tensor scalar(double v) { return from({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
  int64_t dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }

  std::vector<double>& value() { return node_->value; }
  const std::vector<double>& value() const { return node_->value; }
  double* data() { return node_->value.data(); }
  const double* data() const { return node_->value.data(); }

  // Gradient buffer, allocated (zeroed) on first access.
  std::vector<double>& grad();
  const double* grad_data() const;
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  double item() const;
  bool all_finite() const;

  // Stable identity for gradient maps and tape bookkeeping.
  const void* id() const { return node_.get(); }

  bool same_shape(const Tensor& other) const { return node_->shape == other.node_->shape; }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until requested
  };
  std::shared_ptr<Node> node_;
};

// Append-only record of primitive operations. backward() replays the
// closures in strict reverse order; gradient accumulation is additive
// into each tensor's grad buffer.
class Tape {
 public:
  void record(std::function<void()> backward_fn, const Tensor& output);
  void backward(Tensor loss);
  void clear();
  size_t size() const { return nodes_.size(); }
  bool knows(const Tensor& t) const { return outputs_.count(t.id()) > 0; }

 private:
  std::vector<std::function<void()>> nodes_;
  std::unordered_set<const void*> outputs_;
};

// Deterministic RNG stream. Every stochastic choice in the project draws
// from one of these, serially, so fixed seeds give bit-identical runs.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  double uniform() { return unit_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  int64_t integer(int64_t lo, int64_t hi);  // inclusive bounds
  std::mt19937_64& engine() { return engine_; }
  // Derive an independent stream (splitmix64 of seed ^ tag).
  Rng fork(uint64_t tag) const;

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
  uint64_t base_seed_ = 0;
  friend Rng make_rng(uint64_t);
};

Rng make_rng(uint64_t seed);

namespace ops {

// Elementwise, same shape.
Tensor add(Tape* tape, Tensor a, Tensor b);
Tensor sub(Tape* tape, Tensor a, Tensor b);
Tensor mul(Tape* tape, Tensor a, Tensor b);
Tensor scale(Tape* tape, Tensor a, double c);
Tensor exp_(Tape* tape, Tensor a);
Tensor neg(Tape* tape, Tensor a);
Tensor sin_(Tape* tape, Tensor a);
Tensor cos_(Tape* tape, Tensor a);
Tensor sigmoid(Tape* tape, Tensor a);
// min(x, c) elementwise; gradient is zero where the cap binds.
Tensor min_const(Tape* tape, Tensor a, double c);

// x: (..., n) scaled/shifted by a length-n vector broadcast over leading dims.
Tensor mul_rowvec(Tape* tape, Tensor x, Tensor v);
Tensor add_rowvec(Tape* tape, Tensor x, Tensor v);

// y = x Wᵀ where x is (..., in) flattened to (R, in) and W is (out, in).
Tensor linear(Tape* tape, Tensor x, Tensor w);

// (B, N, F) -> (B, F), arithmetic mean over the time axis.
Tensor mean_over_time(Tape* tape, Tensor x);

// Inverted dropout; masks are drawn serially from `rng`.
Tensor dropout(Tape* tape, Tensor x, double rate, Rng& rng);

// Sum of all elements, as a scalar.
Tensor sum_all(Tape* tape, Tensor x);

// Scalar losses (mean over all elements).
Tensor mse_loss(Tape* tape, Tensor pred, Tensor target);
Tensor mae_loss(Tape* tape, Tensor pred, Tensor target);
// logits: (R, s) flattened over leading dims, labels length R.
Tensor softmax_ce_loss(Tape* tape, Tensor logits, const std::vector<int>& labels);

}  // namespace ops

}  // namespace blur
