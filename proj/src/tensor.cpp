#include "blur/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "blur/parallel.hpp"

namespace blur {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(Shape shape) {
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->value.assign(static_cast<size_t>(shape_numel(t.node_->shape)), 0.0);
  return t;
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.node_->value.begin(), t.node_->value.end(), v);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw DimensionError("Tensor::from: data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->value = std::move(data);
  return t;
}

std::vector<double>& Tensor::grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

const double* Tensor::grad_data() const {
  return node_->grad.empty() ? nullptr : node_->grad.data();
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::all_finite() const {
  for (double v : node_->value)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tape::record(std::function<void()> backward_fn, const Tensor& output) {
  nodes_.push_back(std::move(backward_fn));
  outputs_.insert(output.id());
}

void Tape::backward(Tensor loss) {
  if (!knows(loss)) throw ContractError("backward: loss tensor was not produced on this tape");
  if (loss.numel() != 1) throw ContractError("backward: loss must be scalar");
  if (!std::isfinite(loss.item())) throw NumericError("backward: loss is non-finite");
  loss.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void Tape::clear() {
  nodes_.clear();
  outputs_.clear();
}

int64_t Rng::integer(int64_t lo, int64_t hi) {
  std::uniform_int_distribution<int64_t> dist(lo, hi);
  return dist(engine_);
}

static uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::fork(uint64_t tag) const {
  const uint64_t child = splitmix64(base_seed_ ^ splitmix64(tag));
  Rng r(child);
  r.base_seed_ = child;
  return r;
}

Rng make_rng(uint64_t seed) {
  Rng r(seed);
  r.base_seed_ = seed;
  return r;
}

namespace ops {
namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// Rows = product of leading dims, cols = last dim.
std::pair<int64_t, int64_t> as_matrix_dims(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.empty()) throw DimensionError("expected rank >= 1");
  int64_t cols = s.back();
  int64_t rows = 1;
  for (size_t i = 0; i + 1 < s.size(); ++i) rows *= s[i];
  return {rows, cols};
}

// C (rows x cols_out) += or = A (rows x k) * B^T / B, chunked over rows with a
// fixed chunk size so the result is identical for any thread count.
constexpr int64_t kGemmRowChunk = 128;

template <class Fn>
void for_row_chunks(int64_t rows, Fn&& fn) {
  const int64_t chunks = (rows + kGemmRowChunk - 1) / kGemmRowChunk;
  if (chunks <= 1) {
    fn(0, rows);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < chunks; ++c) {
    const int64_t b = c * kGemmRowChunk;
    const int64_t e = b + kGemmRowChunk < rows ? b + kGemmRowChunk : rows;
    fn(b, e);
  }
}

Tensor elementwise_binary(Tape* tape, Tensor a, Tensor b, const char* name,
                          double (*fwd)(double, double),
                          void (*bwd)(double ga, double av, double bv, double* da, double* db)) {
  check_same_shape(a, b, name);
  Tensor out = Tensor::zeros(a.shape());
  const int64_t n = a.numel();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  parallel_chunks(n, [&](int64_t s, int64_t e) {
    for (int64_t i = s; i < e; ++i) po[i] = fwd(pa[i], pb[i]);
  });
  if (tape) {
    tape->record(
        [a, b, out, n, bwd]() mutable {
          const double* g = out.grad().data();
          double* da = a.grad().data();
          double* db = b.grad().data();
          const double* pa2 = a.data();
          const double* pb2 = b.data();
          parallel_chunks(n, [&](int64_t s, int64_t e) {
            for (int64_t i = s; i < e; ++i) {
              double ga = 0, gb = 0;
              bwd(g[i], pa2[i], pb2[i], &ga, &gb);
              da[i] += ga;
              db[i] += gb;
            }
          });
        },
        out);
  }
  return out;
}

Tensor elementwise_unary(Tape* tape, Tensor a, const char* /*name*/, double (*fwd)(double),
                         double (*dfdx_from_xy)(double x, double y)) {
  Tensor out = Tensor::zeros(a.shape());
  const int64_t n = a.numel();
  const double* pa = a.data();
  double* po = out.data();
  parallel_chunks(n, [&](int64_t s, int64_t e) {
    for (int64_t i = s; i < e; ++i) po[i] = fwd(pa[i]);
  });
  if (tape) {
    tape->record(
        [a, out, n, dfdx_from_xy]() mutable {
          const double* g = out.grad().data();
          const double* x = a.data();
          const double* y = out.data();
          double* da = a.grad().data();
          parallel_chunks(n, [&](int64_t s, int64_t e) {
            for (int64_t i = s; i < e; ++i) da[i] += g[i] * dfdx_from_xy(x[i], y[i]);
          });
        },
        out);
  }
  return out;
}

}  // namespace

Tensor add(Tape* tape, Tensor a, Tensor b) {
  return elementwise_binary(
      tape, a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double, double* da, double* db) {
        *da = g;
        *db = g;
      });
}

Tensor sub(Tape* tape, Tensor a, Tensor b) {
  return elementwise_binary(
      tape, a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double, double* da, double* db) {
        *da = g;
        *db = -g;
      });
}

Tensor mul(Tape* tape, Tensor a, Tensor b) {
  return elementwise_binary(
      tape, a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double x, double y, double* da, double* db) {
        *da = g * y;
        *db = g * x;
      });
}

Tensor scale(Tape* tape, Tensor a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  const int64_t n = a.numel();
  const double* pa = a.data();
  double* po = out.data();
  parallel_chunks(n, [&](int64_t s, int64_t e) {
    for (int64_t i = s; i < e; ++i) po[i] = c * pa[i];
  });
  if (tape) {
    tape->record(
        [a, out, n, c]() mutable {
          const double* g = out.grad().data();
          double* da = a.grad().data();
          parallel_chunks(n, [&](int64_t s, int64_t e) {
            for (int64_t i = s; i < e; ++i) da[i] += c * g[i];
          });
        },
        out);
  }
  return out;
}

Tensor neg(Tape* tape, Tensor a) { return scale(tape, a, -1.0); }

Tensor exp_(Tape* tape, Tensor a) {
  return elementwise_unary(
      tape, a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor sin_(Tape* tape, Tensor a) {
  return elementwise_unary(
      tape, a, "sin", [](double x) { return std::sin(x); },
      [](double x, double) { return std::cos(x); });
}

Tensor cos_(Tape* tape, Tensor a) {
  return elementwise_unary(
      tape, a, "cos", [](double x) { return std::cos(x); },
      [](double x, double) { return -std::sin(x); });
}

Tensor sigmoid(Tape* tape, Tensor a) {
  return elementwise_unary(
      tape, a, "sigmoid",
      [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor min_const(Tape* tape, Tensor a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  const int64_t n = a.numel();
  const double* pa = a.data();
  double* po = out.data();
  parallel_chunks(n, [&](int64_t s, int64_t e) {
    for (int64_t i = s; i < e; ++i) po[i] = pa[i] < c ? pa[i] : c;
  });
  if (tape) {
    tape->record(
        [a, out, n, c]() mutable {
          const double* g = out.grad().data();
          const double* x = a.data();
          double* da = a.grad().data();
          parallel_chunks(n, [&](int64_t s, int64_t e) {
            for (int64_t i = s; i < e; ++i)
              if (x[i] < c) da[i] += g[i];
          });
        },
        out);
  }
  return out;
}

Tensor mul_rowvec(Tape* tape, Tensor x, Tensor v) {
  auto [rows, cols] = as_matrix_dims(x);
  if (v.rank() != 1 || v.dim(0) != cols)
    throw DimensionError("mul_rowvec: vector " + shape_str(v.shape()) + " vs last dim " +
                         std::to_string(cols));
  Tensor out = Tensor::zeros(x.shape());
  const double* px = x.data();
  const double* pv = v.data();
  double* po = out.data();
  parallel_chunks(rows, [&](int64_t s, int64_t e) {
    for (int64_t r = s; r < e; ++r)
      for (int64_t c = 0; c < cols; ++c) po[r * cols + c] = px[r * cols + c] * pv[c];
  });
  if (tape) {
    tape->record(
        [x, v, out, rows, cols]() mutable {
          const double* g = out.grad().data();
          const double* px2 = x.data();
          const double* pv2 = v.data();
          double* dx = x.grad().data();
          double* dv = v.grad().data();
          parallel_chunks(rows, [&](int64_t s, int64_t e) {
            for (int64_t r = s; r < e; ++r)
              for (int64_t c = 0; c < cols; ++c) dx[r * cols + c] += g[r * cols + c] * pv2[c];
          });
          // Per-feature reduction in fixed row order.
          parallel_for(cols, [&](int64_t c) {
            double acc = 0;
            for (int64_t r = 0; r < rows; ++r) acc += g[r * cols + c] * px2[r * cols + c];
            dv[c] += acc;
          });
        },
        out);
  }
  return out;
}

Tensor add_rowvec(Tape* tape, Tensor x, Tensor v) {
  auto [rows, cols] = as_matrix_dims(x);
  if (v.rank() != 1 || v.dim(0) != cols)
    throw DimensionError("add_rowvec: vector " + shape_str(v.shape()) + " vs last dim " +
                         std::to_string(cols));
  Tensor out = Tensor::zeros(x.shape());
  const double* px = x.data();
  const double* pv = v.data();
  double* po = out.data();
  parallel_chunks(rows, [&](int64_t s, int64_t e) {
    for (int64_t r = s; r < e; ++r)
      for (int64_t c = 0; c < cols; ++c) po[r * cols + c] = px[r * cols + c] + pv[c];
  });
  if (tape) {
    tape->record(
        [x, v, out, rows, cols]() mutable {
          const double* g = out.grad().data();
          double* dx = x.grad().data();
          double* dv = v.grad().data();
          parallel_chunks(rows * cols, [&](int64_t s, int64_t e) {
            for (int64_t i = s; i < e; ++i) dx[i] += g[i];
          });
          parallel_for(cols, [&](int64_t c) {
            double acc = 0;
            for (int64_t r = 0; r < rows; ++r) acc += g[r * cols + c];
            dv[c] += acc;
          });
        },
        out);
  }
  return out;
}

Tensor linear(Tape* tape, Tensor x, Tensor w) {
  auto [rows, in] = as_matrix_dims(x);
  if (w.rank() != 2 || w.dim(1) != in)
    throw DimensionError("linear: weight " + shape_str(w.shape()) + " vs input " +
                         shape_str(x.shape()));
  const int64_t out_dim = w.dim(0);
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  Tensor out = Tensor::zeros(out_shape);

  CMap xm(x.data(), rows, in);
  CMap wm(w.data(), out_dim, in);
  MMap om(out.data(), rows, out_dim);
  for_row_chunks(rows, [&](int64_t b, int64_t e) {
    om.middleRows(b, e - b).noalias() = xm.middleRows(b, e - b) * wm.transpose();
  });

  if (tape) {
    tape->record(
        [x, w, out, rows, in, out_dim]() mutable {
          CMap g(out.grad().data(), rows, out_dim);
          CMap xm2(x.data(), rows, in);
          CMap wm2(w.data(), out_dim, in);
          MMap dx(x.grad().data(), rows, in);
          MMap dw(w.grad().data(), out_dim, in);
          for_row_chunks(rows, [&](int64_t b, int64_t e) {
            dx.middleRows(b, e - b).noalias() += g.middleRows(b, e - b) * wm2;
          });
          // dW rows chunked: each output row reduces over all data rows in
          // one Eigen call with a fixed order.
          for_row_chunks(out_dim, [&](int64_t b, int64_t e) {
            dw.middleRows(b, e - b).noalias() += g.middleCols(b, e - b).transpose() * xm2;
          });
        },
        out);
  }
  return out;
}

Tensor mean_over_time(Tape* tape, Tensor x) {
  if (x.rank() != 3) throw DimensionError("mean_over_time: expected (B,N,F), got " + shape_str(x.shape()));
  const int64_t B = x.dim(0), N = x.dim(1), F = x.dim(2);
  Tensor out = Tensor::zeros({B, F});
  const double* px = x.data();
  double* po = out.data();
  parallel_for(B, [&](int64_t b) {
    for (int64_t k = 0; k < N; ++k)
      for (int64_t f = 0; f < F; ++f) po[b * F + f] += px[(b * N + k) * F + f];
    for (int64_t f = 0; f < F; ++f) po[b * F + f] /= static_cast<double>(N);
  });
  if (tape) {
    tape->record(
        [x, out, B, N, F]() mutable {
          const double* g = out.grad().data();
          double* dx = x.grad().data();
          const double inv = 1.0 / static_cast<double>(N);
          parallel_for(B, [&](int64_t b) {
            for (int64_t k = 0; k < N; ++k)
              for (int64_t f = 0; f < F; ++f) dx[(b * N + k) * F + f] += g[b * F + f] * inv;
          });
        },
        out);
  }
  return out;
}

Tensor dropout(Tape* tape, Tensor x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0,1)");
  if (rate == 0.0) return x;
  const int64_t n = x.numel();
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) (*mask)[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
  Tensor out = Tensor::zeros(x.shape());
  const double* px = x.data();
  double* po = out.data();
  parallel_chunks(n, [&](int64_t s, int64_t e) {
    for (int64_t i = s; i < e; ++i) po[i] = px[i] * (*mask)[i];
  });
  if (tape) {
    tape->record(
        [x, out, mask, n]() mutable {
          const double* g = out.grad().data();
          double* dx = x.grad().data();
          parallel_chunks(n, [&](int64_t s, int64_t e) {
            for (int64_t i = s; i < e; ++i) dx[i] += g[i] * (*mask)[i];
          });
        },
        out);
  }
  return out;
}

Tensor sum_all(Tape* tape, Tensor x) {
  const int64_t n = x.numel();
  const double* px = x.data();
  double acc = 0;
  for (int64_t i = 0; i < n; ++i) acc += px[i];
  Tensor out = Tensor::scalar(acc);
  if (tape) {
    tape->record(
        [x, out, n]() mutable {
          const double g = out.grad()[0];
          double* dx = x.grad().data();
          parallel_chunks(n, [&](int64_t s, int64_t e) {
            for (int64_t i = s; i < e; ++i) dx[i] += g;
          });
        },
        out);
  }
  return out;
}

Tensor mse_loss(Tape* tape, Tensor pred, Tensor target) {
  check_same_shape(pred, target, "mse_loss");
  const int64_t n = pred.numel();
  const double* pp = pred.data();
  const double* pt = target.data();
  double acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = pp[i] - pt[i];
    acc += d * d;
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  if (tape) {
    tape->record(
        [pred, target, out, n]() mutable {
          const double g = out.grad()[0] * 2.0 / static_cast<double>(n);
          const double* pp2 = pred.data();
          const double* pt2 = target.data();
          double* dp = pred.grad().data();
          parallel_chunks(n, [&](int64_t s, int64_t e) {
            for (int64_t i = s; i < e; ++i) dp[i] += g * (pp2[i] - pt2[i]);
          });
        },
        out);
  }
  return out;
}

Tensor mae_loss(Tape* tape, Tensor pred, Tensor target) {
  check_same_shape(pred, target, "mae_loss");
  const int64_t n = pred.numel();
  const double* pp = pred.data();
  const double* pt = target.data();
  double acc = 0;
  for (int64_t i = 0; i < n; ++i) acc += std::abs(pp[i] - pt[i]);
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  if (tape) {
    tape->record(
        [pred, target, out, n]() mutable {
          const double g = out.grad()[0] / static_cast<double>(n);
          const double* pp2 = pred.data();
          const double* pt2 = target.data();
          double* dp = pred.grad().data();
          parallel_chunks(n, [&](int64_t s, int64_t e) {
            for (int64_t i = s; i < e; ++i) {
              const double d = pp2[i] - pt2[i];
              dp[i] += g * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
            }
          });
        },
        out);
  }
  return out;
}

Tensor softmax_ce_loss(Tape* tape, Tensor logits, const std::vector<int>& labels) {
  auto [rows, s] = as_matrix_dims(logits);
  if (static_cast<int64_t>(labels.size()) != rows)
    throw DimensionError("softmax_ce_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  const double* pl = logits.data();
  double acc = 0;
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = pl + r * s;
    double mx = row[0];
    for (int64_t c = 1; c < s; ++c) mx = std::max(mx, row[c]);
    double sum = 0;
    for (int64_t c = 0; c < s; ++c) sum += std::exp(row[c] - mx);
    acc += std::log(sum) + mx - row[labels[static_cast<size_t>(r)]];
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(rows));
  if (tape) {
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    tape->record(
        [logits, out, labels_copy, rows, s]() mutable {
          const double g = out.grad()[0] / static_cast<double>(rows);
          const double* pl2 = logits.data();
          double* dl = logits.grad().data();
          parallel_for(rows, [&](int64_t r) {
            const double* row = pl2 + r * s;
            double mx = row[0];
            for (int64_t c = 1; c < s; ++c) mx = std::max(mx, row[c]);
            double sum = 0;
            for (int64_t c = 0; c < s; ++c) sum += std::exp(row[c] - mx);
            for (int64_t c = 0; c < s; ++c) {
              const double p = std::exp(row[c] - mx) / sum;
              dl[r * s + c] += g * (p - (c == (*labels_copy)[static_cast<size_t>(r)] ? 1.0 : 0.0));
            }
          });
        },
        out);
  }
  return out;
}

}  // namespace ops
}  // namespace blur
