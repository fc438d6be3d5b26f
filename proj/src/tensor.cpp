#include "seqtag/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "seqtag/kernels.hpp"

namespace seqtag {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    raise(ErrorKind::dimension,
          std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// --- Tensor ----------------------------------------------------------------

TensorPtr Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  auto t = TensorPtr(new Tensor());
  t->shape_ = std::move(shape);
  t->data_.assign(shape_numel(t->shape_), 0.0);
  t->requires_grad_ = requires_grad;
  if (requires_grad) t->grad_.assign(t->data_.size(), 0.0);
  return t;
}

TensorPtr Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  std::fill(t->data_.begin(), t->data_.end(), value);
  return t;
}

TensorPtr Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                            bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    raise(ErrorKind::dimension, "from_data: shape " + shape_to_str(shape) + " wants " +
                                    std::to_string(shape_numel(shape)) + " values, got " +
                                    std::to_string(data.size()));
  }
  for (double v : data) {
    if (!std::isfinite(v)) raise(ErrorKind::numeric, "from_data: non-finite value");
  }
  auto t = TensorPtr(new Tensor());
  t->shape_ = std::move(shape);
  t->data_ = std::move(data);
  t->requires_grad_ = requires_grad;
  if (requires_grad) t->grad_.assign(t->data_.size(), 0.0);
  return t;
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

TensorPtr Tensor::uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng,
                          bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  for (double& v : t->data_) v = rng.uniform(lo, hi);
  return t;
}

std::span<double> Tensor::grad() {
  if (!requires_grad_) raise(ErrorKind::contract, "grad() on a tensor without requires_grad");
  return grad_;
}

std::span<const double> Tensor::grad() const {
  if (!requires_grad_) raise(ErrorKind::contract, "grad() on a tensor without requires_grad");
  return grad_;
}

void Tensor::zero_grad() {
  std::fill(grad_.begin(), grad_.end(), 0.0);
}

double Tensor::value() const {
  if (!is_scalar()) raise(ErrorKind::contract, "value() on non-scalar tensor " + shape_str());
  return data_[0];
}

TensorPtr Tensor::clone() const {
  auto t = TensorPtr(new Tensor());
  t->shape_ = shape_;
  t->data_ = data_;
  t->grad_ = grad_;
  t->requires_grad_ = requires_grad_;
  return t;
}

std::string Tensor::shape_str() const { return shape_to_str(shape_); }

// --- Graph -------------------------------------------------------------

void Graph::record(TensorPtr output, std::function<void()> backward_step) {
  steps_.push_back({std::move(output), std::move(backward_step)});
}

void Graph::backward(const TensorPtr& loss) {
  if (!loss->is_scalar()) {
    raise(ErrorKind::contract, "backward: loss must be scalar, got " + loss->shape_str());
  }
  if (!loss->requires_grad()) return;  // constant w.r.t. every parameter
  // Reset grads of everything this tape produced so a repeated call adds
  // exactly one more gradient into the leaves.
  for (auto& s : steps_) {
    if (s.output->requires_grad()) s.output->zero_grad();
  }
  loss->grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    it->backward();
  }
}

void Graph::clear() { steps_.clear(); }

// --- op helpers -------------------------------------------------------

namespace {

TensorPtr make_output(std::vector<std::size_t> shape, bool requires_grad) {
  return Tensor::zeros(std::move(shape), requires_grad);
}

bool any_grad(const TensorPtr& a) { return a->requires_grad(); }
bool any_grad(const TensorPtr& a, const TensorPtr& b) {
  return a->requires_grad() || b->requires_grad();
}

}  // namespace

// --- matmul -------------------------------------------------------------

TensorPtr matmul(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  const auto& K = kernels::active();
  if (a->rank() != 2) {
    raise(ErrorKind::dimension, "matmul: left operand must be rank 2, got " + a->shape_str());
  }
  const bool vec = b->rank() == 1;
  if (!vec && b->rank() != 2) {
    raise(ErrorKind::dimension, "matmul: right operand must be rank 1 or 2, got " + b->shape_str());
  }
  const std::size_t m = a->dim(0), k = a->dim(1);
  if (b->dim(0) != k) {
    raise(ErrorKind::dimension,
          "matmul: inner dimensions differ, " + a->shape_str() + " vs " + b->shape_str());
  }

  if (vec) {
    auto out = make_output({m}, any_grad(a, b));
    const double* A = a->data().data();
    const double* x = b->data().data();
    double* y = out->data().data();
    for (std::size_t i = 0; i < m; ++i) y[i] = K.dot(A + i * k, x, k);
    if (out->requires_grad()) {
      g.record(out, [a, b, out, m, k, &K]() {
        const double* dy = out->grad().data();
        if (a->requires_grad()) {
          double* dA = a->grad().data();
          const double* x = b->data().data();
          for (std::size_t i = 0; i < m; ++i) K.axpy(dA + i * k, dy[i], x, k);
        }
        if (b->requires_grad()) {
          double* dx = b->grad().data();
          const double* A = a->data().data();
          for (std::size_t i = 0; i < m; ++i) K.axpy(dx, dy[i], A + i * k, k);
        }
      });
    }
    return out;
  }

  const std::size_t n = b->dim(1);
  auto out = make_output({m, n}, any_grad(a, b));
  {
    const double* A = a->data().data();
    const double* B = b->data().data();
    double* C = out->data().data();
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = C + i * n;
      for (std::size_t kk = 0; kk < k; ++kk) {
        K.axpy(crow, A[i * k + kk], B + kk * n, n);
      }
    }
  }
  if (out->requires_grad()) {
    g.record(out, [a, b, out, m, k, n, &K]() {
      const double* dC = out->grad().data();
      if (a->requires_grad()) {
        // dA = dC · B^T
        double* dA = a->grad().data();
        const double* B = b->data().data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t l = 0; l < k; ++l) {
            dA[i * k + l] += K.dot(dC + i * n, B + l * n, n);
          }
        }
      }
      if (b->requires_grad()) {
        // dB = A^T · dC
        double* dB = b->grad().data();
        const double* A = a->data().data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t l = 0; l < k; ++l) {
            K.axpy(dB + l * n, A[i * k + l], dC + i * n, n);
          }
        }
      }
    });
  }
  return out;
}

// --- elementwise ---------------------------------------------------------

TensorPtr add(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  const auto& K = kernels::active();
  check_same_shape(*a, *b, "add");
  auto out = make_output(a->shape(), any_grad(a, b));
  K.add(out->data().data(), a->data().data(), b->data().data(), a->numel());
  if (out->requires_grad()) {
    g.record(out, [a, b, out, &K]() {
      const double* dy = out->grad().data();
      const std::size_t n = out->numel();
      if (a->requires_grad()) K.axpy(a->grad().data(), 1.0, dy, n);
      if (b->requires_grad()) K.axpy(b->grad().data(), 1.0, dy, n);
    });
  }
  return out;
}

TensorPtr sub(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  const auto& K = kernels::active();
  check_same_shape(*a, *b, "sub");
  auto out = make_output(a->shape(), any_grad(a, b));
  const double* pa = a->data().data();
  const double* pb = b->data().data();
  double* po = out->data().data();
  for (std::size_t i = 0; i < a->numel(); ++i) po[i] = pa[i] - pb[i];
  if (out->requires_grad()) {
    g.record(out, [a, b, out, &K]() {
      const double* dy = out->grad().data();
      const std::size_t n = out->numel();
      if (a->requires_grad()) K.axpy(a->grad().data(), 1.0, dy, n);
      if (b->requires_grad()) K.axpy(b->grad().data(), -1.0, dy, n);
    });
  }
  return out;
}

TensorPtr mul(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  const auto& K = kernels::active();
  check_same_shape(*a, *b, "mul");
  auto out = make_output(a->shape(), any_grad(a, b));
  K.mul(out->data().data(), a->data().data(), b->data().data(), a->numel());
  if (out->requires_grad()) {
    g.record(out, [a, b, out]() {
      const double* dy = out->grad().data();
      const std::size_t n = out->numel();
      if (a->requires_grad()) {
        double* da = a->grad().data();
        const double* pb = b->data().data();
        for (std::size_t i = 0; i < n; ++i) da[i] += dy[i] * pb[i];
      }
      if (b->requires_grad()) {
        double* db = b->grad().data();
        const double* pa = a->data().data();
        for (std::size_t i = 0; i < n; ++i) db[i] += dy[i] * pa[i];
      }
    });
  }
  return out;
}

TensorPtr scale(Graph& g, const TensorPtr& x, double c) {
  const auto& K = kernels::active();
  auto out = make_output(x->shape(), any_grad(x));
  std::copy(x->data().begin(), x->data().end(), out->data().begin());
  K.scale(out->data().data(), c, out->numel());
  if (out->requires_grad()) {
    g.record(out, [x, out, c, &K]() {
      K.axpy(x->grad().data(), c, out->grad().data(), out->numel());
    });
  }
  return out;
}

TensorPtr tanh(Graph& g, const TensorPtr& x) {
  auto out = make_output(x->shape(), any_grad(x));
  const double* px = x->data().data();
  double* po = out->data().data();
  for (std::size_t i = 0; i < x->numel(); ++i) po[i] = std::tanh(px[i]);
  if (out->requires_grad()) {
    g.record(out, [x, out]() {
      const double* dy = out->grad().data();
      const double* y = out->data().data();
      double* dx = x->grad().data();
      for (std::size_t i = 0; i < out->numel(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
    });
  }
  return out;
}

TensorPtr sigmoid(Graph& g, const TensorPtr& x) {
  auto out = make_output(x->shape(), any_grad(x));
  const double* px = x->data().data();
  double* po = out->data().data();
  for (std::size_t i = 0; i < x->numel(); ++i) po[i] = stable_sigmoid(px[i]);
  if (out->requires_grad()) {
    g.record(out, [x, out]() {
      const double* dy = out->grad().data();
      const double* y = out->data().data();
      double* dx = x->grad().data();
      for (std::size_t i = 0; i < out->numel(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
    });
  }
  return out;
}

// --- reductions ------------------------------------------------------------

TensorPtr logsumexp(Graph& g, const TensorPtr& x) {
  if (x->rank() != 1 || x->numel() == 0) {
    raise(ErrorKind::domain, "logsumexp: nonempty rank-1 tensor required, got " + x->shape_str());
  }
  const double* px = x->data().data();
  const std::size_t n = x->numel();
  double mx = px[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, px[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(px[i] - mx);
  auto out = Tensor::zeros({}, any_grad(x));
  out->data()[0] = mx + std::log(s);
  if (out->requires_grad()) {
    g.record(out, [x, out, n]() {
      const double dy = out->grad()[0];
      const double y = out->data()[0];
      const double* px = x->data().data();
      double* dx = x->grad().data();
      for (std::size_t i = 0; i < n; ++i) dx[i] += dy * std::exp(px[i] - y);
    });
  }
  return out;
}

TensorPtr logsumexp_cols(Graph& g, const TensorPtr& m) {
  if (m->rank() != 2 || m->dim(0) == 0) {
    raise(ErrorKind::domain, "logsumexp_cols: nonempty rank-2 tensor required, got " + m->shape_str());
  }
  const std::size_t p = m->dim(0), f = m->dim(1);
  auto out = make_output({f}, any_grad(m));
  const double* pm = m->data().data();
  double* po = out->data().data();
  for (std::size_t j = 0; j < f; ++j) {
    double mx = pm[j];
    for (std::size_t i = 1; i < p; ++i) mx = std::max(mx, pm[i * f + j]);
    double s = 0.0;
    for (std::size_t i = 0; i < p; ++i) s += std::exp(pm[i * f + j] - mx);
    po[j] = mx + std::log(s);
  }
  if (out->requires_grad()) {
    g.record(out, [m, out, p, f]() {
      const double* dy = out->grad().data();
      const double* y = out->data().data();
      const double* pm = m->data().data();
      double* dm = m->grad().data();
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < f; ++j) {
          dm[i * f + j] += dy[j] * std::exp(pm[i * f + j] - y[j]);
        }
      }
    });
  }
  return out;
}

MaxOverRows max_over_rows(Graph& g, const TensorPtr& m) {
  if (m->rank() != 2 || m->dim(0) == 0) {
    raise(ErrorKind::domain, "max_over_rows: nonempty rank-2 tensor required, got " + m->shape_str());
  }
  const std::size_t p = m->dim(0), f = m->dim(1);
  auto out = make_output({f}, any_grad(m));
  std::vector<std::size_t> argmax(f, 0);
  const double* pm = m->data().data();
  double* po = out->data().data();
  for (std::size_t j = 0; j < f; ++j) {
    double best = pm[j];
    std::size_t arg = 0;
    for (std::size_t i = 1; i < p; ++i) {
      if (pm[i * f + j] > best) {  // strict: ties keep the lowest row
        best = pm[i * f + j];
        arg = i;
      }
    }
    po[j] = best;
    argmax[j] = arg;
  }
  if (out->requires_grad()) {
    g.record(out, [m, out, argmax, f]() {
      const double* dy = out->grad().data();
      double* dm = m->grad().data();
      for (std::size_t j = 0; j < f; ++j) dm[argmax[j] * f + j] += dy[j];
    });
  }
  return {out, std::move(argmax)};
}

TensorPtr sum(Graph& g, const TensorPtr& x) {
  auto out = Tensor::zeros({}, any_grad(x));
  double s = 0.0;
  for (double v : x->data()) s += v;
  out->data()[0] = s;
  if (out->requires_grad()) {
    g.record(out, [x, out]() {
      const double dy = out->grad()[0];
      double* dx = x->grad().data();
      for (std::size_t i = 0; i < x->numel(); ++i) dx[i] += dy;
    });
  }
  return out;
}

// --- gather / reshape ops ---------------------------------------------------

TensorPtr element(Graph& g, const TensorPtr& v, std::size_t i) {
  if (i >= v->numel()) {
    raise(ErrorKind::dimension, "element: index " + std::to_string(i) + " out of " + v->shape_str());
  }
  auto out = Tensor::zeros({}, any_grad(v));
  out->data()[0] = v->data()[i];
  if (out->requires_grad()) {
    g.record(out, [v, out, i]() { v->grad()[i] += out->grad()[0]; });
  }
  return out;
}

TensorPtr element(Graph& g, const TensorPtr& m, std::size_t i, std::size_t j) {
  if (m->rank() != 2 || i >= m->dim(0) || j >= m->dim(1)) {
    raise(ErrorKind::dimension, "element: index (" + std::to_string(i) + "," + std::to_string(j) +
                                    ") out of " + m->shape_str());
  }
  return element(g, m, i * m->dim(1) + j);
}

TensorPtr row(Graph& g, const TensorPtr& m, std::size_t i) {
  const auto& K = kernels::active();
  if (m->rank() != 2 || i >= m->dim(0)) {
    raise(ErrorKind::dimension, "row: index " + std::to_string(i) + " out of " + m->shape_str());
  }
  const std::size_t f = m->dim(1);
  auto out = make_output({f}, any_grad(m));
  std::copy_n(m->data().data() + i * f, f, out->data().data());
  if (out->requires_grad()) {
    g.record(out, [m, out, i, f, &K]() {
      K.axpy(m->grad().data() + i * f, 1.0, out->grad().data(), f);
    });
  }
  return out;
}

TensorPtr concat(Graph& g, std::span<const TensorPtr> parts) {
  const auto& K = kernels::active();
  if (parts.empty()) raise(ErrorKind::domain, "concat: no parts");
  std::size_t total = 0;
  bool needs = false;
  for (const auto& p : parts) {
    if (p->rank() != 1) raise(ErrorKind::dimension, "concat: rank-1 parts required, got " + p->shape_str());
    total += p->numel();
    needs = needs || p->requires_grad();
  }
  auto out = make_output({total}, needs);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->data().begin(), p->data().end(), out->data().begin() + off);
    off += p->numel();
  }
  if (out->requires_grad()) {
    std::vector<TensorPtr> held(parts.begin(), parts.end());
    g.record(out, [held, out, &K]() {
      const double* dy = out->grad().data();
      std::size_t off = 0;
      for (const auto& p : held) {
        if (p->requires_grad()) K.axpy(p->grad().data(), 1.0, dy + off, p->numel());
        off += p->numel();
      }
    });
  }
  return out;
}

TensorPtr stack_rows(Graph& g, std::span<const TensorPtr> rows) {
  const auto& K = kernels::active();
  if (rows.empty()) raise(ErrorKind::domain, "stack_rows: no rows");
  const std::size_t f = rows.front()->numel();
  bool needs = false;
  for (const auto& r : rows) {
    if (r->rank() != 1 || r->numel() != f) {
      raise(ErrorKind::dimension, "stack_rows: rows must all be rank-1 length " + std::to_string(f));
    }
    needs = needs || r->requires_grad();
  }
  auto out = make_output({rows.size(), f}, needs);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i]->data().begin(), rows[i]->data().end(), out->data().begin() + i * f);
  }
  if (out->requires_grad()) {
    std::vector<TensorPtr> held(rows.begin(), rows.end());
    g.record(out, [held, out, f, &K]() {
      const double* dy = out->grad().data();
      for (std::size_t i = 0; i < held.size(); ++i) {
        if (held[i]->requires_grad()) K.axpy(held[i]->grad().data(), 1.0, dy + i * f, f);
      }
    });
  }
  return out;
}

TensorPtr add_rowwise(Graph& g, const TensorPtr& m, const TensorPtr& v) {
  const auto& K = kernels::active();
  if (m->rank() != 2 || v->rank() != 1 || v->numel() != m->dim(1)) {
    raise(ErrorKind::dimension, "add_rowwise: " + m->shape_str() + " vs " + v->shape_str());
  }
  const std::size_t p = m->dim(0), f = m->dim(1);
  auto out = make_output({p, f}, any_grad(m, v));
  for (std::size_t i = 0; i < p; ++i) {
    K.add(out->data().data() + i * f, m->data().data() + i * f, v->data().data(), f);
  }
  if (out->requires_grad()) {
    g.record(out, [m, v, out, p, f, &K]() {
      const double* dy = out->grad().data();
      if (m->requires_grad()) K.axpy(m->grad().data(), 1.0, dy, p * f);
      if (v->requires_grad()) {
        double* dv = v->grad().data();
        for (std::size_t i = 0; i < p; ++i) K.axpy(dv, 1.0, dy + i * f, f);
      }
    });
  }
  return out;
}

TensorPtr add_colwise(Graph& g, const TensorPtr& m, const TensorPtr& v) {
  if (m->rank() != 2 || v->rank() != 1 || v->numel() != m->dim(0)) {
    raise(ErrorKind::dimension, "add_colwise: " + m->shape_str() + " vs " + v->shape_str());
  }
  const auto& K = kernels::active();
  const std::size_t p = m->dim(0), f = m->dim(1);
  auto out = make_output({p, f}, any_grad(m, v));
  const double* pm = m->data().data();
  const double* pv = v->data().data();
  double* po = out->data().data();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < f; ++j) po[i * f + j] = pm[i * f + j] + pv[i];
  }
  if (out->requires_grad()) {
    g.record(out, [m, v, out, p, f, &K]() {
      const double* dy = out->grad().data();
      if (m->requires_grad()) K.axpy(m->grad().data(), 1.0, dy, p * f);
      if (v->requires_grad()) {
        double* dv = v->grad().data();
        for (std::size_t i = 0; i < p; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < f; ++j) s += dy[i * f + j];
          dv[i] += s;
        }
      }
    });
  }
  return out;
}

TensorPtr dropout(Graph& g, const TensorPtr& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    raise(ErrorKind::contract, "dropout: rate must be in [0,1), got " + std::to_string(rate));
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  auto out = make_output(x->shape(), any_grad(x));
  std::vector<double> mask(x->numel());
  for (double& mv : mask) mv = rng.uniform() < rate ? 0.0 : keep_scale;
  const double* px = x->data().data();
  double* po = out->data().data();
  for (std::size_t i = 0; i < x->numel(); ++i) po[i] = px[i] * mask[i];
  if (out->requires_grad()) {
    g.record(out, [x, out, mask = std::move(mask)]() {
      const double* dy = out->grad().data();
      double* dx = x->grad().data();
      for (std::size_t i = 0; i < out->numel(); ++i) dx[i] += dy[i] * mask[i];
    });
  }
  return out;
}

// --- gradient checking -------------------------------------------------

namespace {

double eval_value(const std::function<TensorPtr(Graph&)>& f) {
  Graph g;
  TensorPtr loss = f(g);
  const double v = loss->value();
  if (!std::isfinite(v)) raise(ErrorKind::numeric, "grad_check: non-finite objective");
  return v;
}

}  // namespace

std::vector<GroupCheck> grad_check(const std::function<TensorPtr(Graph&)>& f,
                                   std::span<const std::pair<std::string, TensorPtr>> params,
                                   const GradCheckOptions& opts) {
  if (opts.eps <= 0.0) raise(ErrorKind::contract, "grad_check: eps must be positive");

  // One tape pass gives the analytic gradients for every group.
  std::vector<std::vector<double>> analytic;
  {
    for (const auto& [name, p] : params) {
      (void)name;
      p->zero_grad();
    }
    Graph g;
    TensorPtr loss = f(g);
    if (!std::isfinite(loss->value())) raise(ErrorKind::numeric, "grad_check: non-finite objective");
    g.backward(loss);
    for (const auto& [name, p] : params) {
      (void)name;
      auto gr = p->grad();
      analytic.emplace_back(gr.begin(), gr.end());
    }
  }

  Rng rng(opts.seed);
  std::vector<GroupCheck> report;
  for (std::size_t gi = 0; gi < params.size(); ++gi) {
    const auto& [name, p] = params[gi];
    const std::size_t n = p->numel();
    std::vector<std::size_t> coords;
    if (n <= opts.coords_per_group) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      std::unordered_set<std::size_t> seen;
      while (seen.size() < opts.coords_per_group) seen.insert(rng.index(n));
      coords.assign(seen.begin(), seen.end());
      std::sort(coords.begin(), coords.end());
    }

    GroupCheck gc{name, 0.0, coords.size()};
    for (std::size_t c : coords) {
      double* slot = &p->data()[c];
      const double saved = *slot;
      *slot = saved + opts.eps;
      const double f_plus = eval_value(f);
      *slot = saved - opts.eps;
      const double f_minus = eval_value(f);
      *slot = saved;
      const double g_fd = (f_plus - f_minus) / (2.0 * opts.eps);
      const double g_ad = analytic[gi][c];
      const double rel =
          std::fabs(g_ad - g_fd) / std::max({std::fabs(g_ad), std::fabs(g_fd), 1e-8});
      gc.max_rel_err = std::max(gc.max_rel_err, rel);
    }
    report.push_back(std::move(gc));
  }
  return report;
}

double grad_check_max(const std::function<TensorPtr(Graph&)>& f,
                      std::span<const std::pair<std::string, TensorPtr>> params,
                      const GradCheckOptions& opts) {
  double worst = 0.0;
  for (const auto& gc : grad_check(f, params, opts)) worst = std::max(worst, gc.max_rel_err);
  return worst;
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::vocabulary: return "vocabulary error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::scheme: return "scheme error";
    case ErrorKind::format: return "format error";
    case ErrorKind::contract: return "contract error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::checkpoint: return "corrupt checkpoint";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::guard: return "guard error";
    case ErrorKind::io: return "io error";
  }
  return "error";
}

}  // namespace seqtag
