#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqtag/error.hpp"
#include "seqtag/rng.hpp"

namespace seqtag {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major f64 tensor. Tensors that require gradients carry a
// same-shape grad buffer; gradient accumulation is additive and the caller
// zeroes grads between batches.
class Tensor {
 public:
  static TensorPtr zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static TensorPtr full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
  static TensorPtr from_data(std::vector<std::size_t> shape, std::vector<double> data,
                             bool requires_grad = false);
  static TensorPtr scalar(double value, bool requires_grad = false);
  static TensorPtr uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng,
                           bool requires_grad = false);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool is_scalar() const { return data_.size() == 1 && shape_.size() <= 1; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool requires_grad() const { return requires_grad_; }
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  double value() const;  // scalar tensors only

  double& operator()(std::size_t i) { return data_[i]; }
  double operator()(std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  TensorPtr clone() const;  // deep copy of data (and grad state)

  std::string shape_str() const;

 private:
  Tensor() = default;

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

// Tape of recorded operations in execution order. One graph per batch;
// backward replays the tape in reverse, so inputs always precede their
// consumers and every recorded step runs exactly once.
class Graph {
 public:
  // Registers an op: `output` is the tensor the op produced, `backward_step`
  // propagates output->grad into the op's input grads.
  void record(TensorPtr output, std::function<void()> backward_step);

  // Seeds d(loss)/d(loss) = 1 and replays the tape. Parameter grads
  // accumulate across calls; grads of tensors recorded on this tape are
  // reset first so a repeated call adds exactly one more gradient.
  void backward(const TensorPtr& loss);

  std::size_t size() const { return steps_.size(); }
  void clear();

 private:
  struct Step {
    TensorPtr output;
    std::function<void()> backward;
  };
  std::vector<Step> steps_;
};

// --- recorded operations -------------------------------------------------
// Every op propagates requires_grad from its inputs and registers a backward
// rule on the graph when the output needs one.

// [m×k]·[k×n] -> [m×n], or [m×k]·[k] -> [m]
TensorPtr matmul(Graph& g, const TensorPtr& a, const TensorPtr& b);

TensorPtr add(Graph& g, const TensorPtr& a, const TensorPtr& b);  // same shape
TensorPtr sub(Graph& g, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Graph& g, const TensorPtr& a, const TensorPtr& b);  // elementwise
TensorPtr scale(Graph& g, const TensorPtr& x, double c);

TensorPtr tanh(Graph& g, const TensorPtr& x);
TensorPtr sigmoid(Graph& g, const TensorPtr& x);

// log sum exp, max-shifted. Vector form reduces [n] to a scalar; the column
// form reduces [p×f] along rows to [f].
TensorPtr logsumexp(Graph& g, const TensorPtr& x);
TensorPtr logsumexp_cols(Graph& g, const TensorPtr& m);

struct MaxOverRows {
  TensorPtr values;                 // [f]
  std::vector<std::size_t> argmax;  // row index per column, ties -> lowest
};
MaxOverRows max_over_rows(Graph& g, const TensorPtr& m);  // [p×f] -> [f]

TensorPtr sum(Graph& g, const TensorPtr& x);  // all elements -> scalar

// single element -> scalar; backward scatters
TensorPtr element(Graph& g, const TensorPtr& v, std::size_t i);
TensorPtr element(Graph& g, const TensorPtr& m, std::size_t i, std::size_t j);

TensorPtr row(Graph& g, const TensorPtr& m, std::size_t i);  // [p×f] -> [f]

TensorPtr concat(Graph& g, std::span<const TensorPtr> parts);             // rank-1 cat
TensorPtr stack_rows(Graph& g, std::span<const TensorPtr> rows);          // n×[f] -> [n×f]
TensorPtr add_rowwise(Graph& g, const TensorPtr& m, const TensorPtr& v);  // m[i,j]+v[j]
TensorPtr add_colwise(Graph& g, const TensorPtr& m, const TensorPtr& v);  // m[i,j]+v[i]

// Inverted dropout: kept activations scale by 1/(1-rate) so inference is a
// plain forward pass. Callers skip the op entirely when inactive.
TensorPtr dropout(Graph& g, const TensorPtr& x, double rate, Rng& rng);

// --- gradient checking ----------------------------------------------------

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t coords_per_group = 200;
  std::uint64_t seed = 17;
};

struct GroupCheck {
  std::string group;
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
};

// Compares the tape gradient of f against central finite differences on
// sampled coordinates of every parameter group. f must be deterministic and
// rebuild its graph on the Graph it is handed.
std::vector<GroupCheck> grad_check(const std::function<TensorPtr(Graph&)>& f,
                                   std::span<const std::pair<std::string, TensorPtr>> params,
                                   const GradCheckOptions& opts = {});

double grad_check_max(const std::function<TensorPtr(Graph&)>& f,
                      std::span<const std::pair<std::string, TensorPtr>> params,
                      const GradCheckOptions& opts = {});

}  // namespace seqtag
