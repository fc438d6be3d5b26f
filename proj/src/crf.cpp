#include "seqtag/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seqtag::crf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_emissions(const Tensor& em, const CrfParams& params) {
  if (em.rank() != 2 || em.dim(0) == 0) {
    raise(ErrorKind::dimension, "emission table must be rank-2 with n >= 1, got " + em.shape_str());
  }
  if (em.dim(1) != params.num_tags()) {
    raise(ErrorKind::dimension, "emission table has " + std::to_string(em.dim(1)) +
                                    " tags, CRF has " + std::to_string(params.num_tags()));
  }
}

void check_tags(std::span<const int> tags, std::size_t n, std::size_t num_tags) {
  if (tags.size() != n) {
    raise(ErrorKind::contract, "tag sequence length " + std::to_string(tags.size()) +
                                   " != emission length " + std::to_string(n));
  }
  for (int t : tags) {
    if (t < 0 || static_cast<std::size_t>(t) >= num_tags) {
      raise(ErrorKind::contract, "tag index " + std::to_string(t) + " outside label set");
    }
  }
}

}  // namespace

CrfParams CrfParams::init(std::size_t num_tags, Rng& rng) {
  CrfParams p;
  p.transitions = Tensor::uniform({num_tags, num_tags}, -0.1, 0.1, rng, true);
  p.begin = Tensor::uniform({num_tags}, -0.1, 0.1, rng, true);
  p.end = Tensor::uniform({num_tags}, -0.1, 0.1, rng, true);
  return p;
}

// Accumulation order deliberately mirrors log_partition's recursion
// (score_t = s_t + (T + score_{t-1})) so that NLL is exactly 0 when only one
// sequence exists.
TensorPtr sequence_score(Graph& g, const TensorPtr& emissions, std::span<const int> tags,
                         const CrfParams& params) {
  check_emissions(*emissions, params);
  const std::size_t n = emissions->dim(0);
  check_tags(tags, n, params.num_tags());

  TensorPtr score = add(g, element(g, emissions, 0, static_cast<std::size_t>(tags[0])),
                        element(g, params.begin, static_cast<std::size_t>(tags[0])));
  for (std::size_t t = 1; t < n; ++t) {
    TensorPtr hop = add(g,
                        element(g, params.transitions, static_cast<std::size_t>(tags[t - 1]),
                                static_cast<std::size_t>(tags[t])),
                        score);
    score = add(g, element(g, emissions, t, static_cast<std::size_t>(tags[t])), hop);
  }
  return add(g, score, element(g, params.end, static_cast<std::size_t>(tags[n - 1])));
}

TensorPtr log_partition(Graph& g, const TensorPtr& emissions, const CrfParams& params) {
  check_emissions(*emissions, params);
  const std::size_t n = emissions->dim(0);

  TensorPtr alpha = add(g, row(g, emissions, 0), params.begin);
  for (std::size_t t = 1; t < n; ++t) {
    TensorPtr lattice = add_colwise(g, params.transitions, alpha);  // T[i,j] + a[i]
    alpha = add(g, row(g, emissions, t), logsumexp_cols(g, lattice));
  }
  return logsumexp(g, add(g, alpha, params.end));
}

TensorPtr neg_log_likelihood(Graph& g, const TensorPtr& emissions, std::span<const int> tags,
                             const CrfParams& params) {
  return sub(g, log_partition(g, emissions, params), sequence_score(g, emissions, tags, params));
}

Decode viterbi_decode(const Tensor& emissions, const CrfParams& params) {
  check_emissions(emissions, params);
  const std::size_t n = emissions.dim(0);
  const std::size_t T = params.num_tags();
  const double* em = emissions.data().data();
  const double* trans = params.transitions->data().data();
  const double* b = params.begin->data().data();
  const double* e = params.end->data().data();

  std::vector<double> score(T), next(T);
  std::vector<int> backptr(n > 1 ? (n - 1) * T : 0);
  for (std::size_t j = 0; j < T; ++j) score[j] = b[j] + em[j];

  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < T; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (std::size_t i = 0; i < T; ++i) {
        const double s = score[i] + trans[i * T + j];
        if (s > best) {  // strict: ties keep the lowest predecessor
          best = s;
          arg = static_cast<int>(i);
        }
      }
      next[j] = best + em[t * T + j];
      backptr[(t - 1) * T + j] = arg;
    }
    std::swap(score, next);
  }
  for (std::size_t j = 0; j < T; ++j) score[j] += e[j];

  std::size_t last = 0;
  for (std::size_t j = 1; j < T; ++j) {
    if (score[j] > score[last]) last = j;
  }

  Decode out;
  out.score = score[last];
  out.tags.assign(n, 0);
  out.tags[n - 1] = static_cast<int>(last);
  for (std::size_t t = n - 1; t > 0; --t) {
    out.tags[t - 1] = backptr[(t - 1) * T + out.tags[t]];
  }
  return out;
}

std::vector<int> constrained_decode(const Tensor& emissions, const CrfParams& params,
                                    const TransitionMask& mask) {
  check_emissions(emissions, params);
  const std::size_t n = emissions.dim(0);
  const std::size_t T = params.num_tags();
  if (mask.num_tags != T) {
    raise(ErrorKind::dimension, "mask covers " + std::to_string(mask.num_tags) + " tags, CRF has " +
                                    std::to_string(T));
  }
  const double* em = emissions.data().data();
  const double* trans = params.transitions->data().data();
  const double* b = params.begin->data().data();
  const double* e = params.end->data().data();

  std::vector<double> score(T), next(T);
  std::vector<int> backptr(n > 1 ? (n - 1) * T : 0);
  for (std::size_t j = 0; j < T; ++j) {
    score[j] = mask.begin_ok[j] ? b[j] + em[j] : kNegInf;
  }
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < T; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (std::size_t i = 0; i < T; ++i) {
        if (!mask.allowed[i * T + j] || score[i] == kNegInf) continue;
        const double s = score[i] + trans[i * T + j];
        if (s > best) {
          best = s;
          arg = static_cast<int>(i);
        }
      }
      next[j] = best == kNegInf ? kNegInf : best + em[t * T + j];
      backptr[(t - 1) * T + j] = arg;
    }
    std::swap(score, next);
  }

  std::size_t last = T;  // sentinel: nothing feasible yet
  double best = kNegInf;
  for (std::size_t j = 0; j < T; ++j) {
    if (!mask.end_ok[j] || score[j] == kNegInf) continue;
    const double s = score[j] + e[j];
    if (s > best || last == T) {
      best = s;
      last = j;
    }
  }
  if (last == T) raise(ErrorKind::infeasible, "constrained_decode: no valid path under mask");

  std::vector<int> tags(n, 0);
  tags[n - 1] = static_cast<int>(last);
  for (std::size_t t = n - 1; t > 0; --t) {
    tags[t - 1] = backptr[(t - 1) * T + tags[t]];
  }
  return tags;
}

Enumeration enumerate_oracle(const Tensor& emissions, const CrfParams& params) {
  check_emissions(emissions, params);
  const std::size_t n = emissions.dim(0);
  const std::size_t T = params.num_tags();

  std::size_t count = 1;
  for (std::size_t t = 0; t < n; ++t) {
    count *= T;
    if (count > 1000000) {
      raise(ErrorKind::guard, "enumerate_oracle: |T|^n exceeds 1e6");
    }
  }

  const double* em = emissions.data().data();
  const double* trans = params.transitions->data().data();
  const double* b = params.begin->data().data();
  const double* e = params.end->data().data();

  std::vector<double> scores(count);
  std::vector<int> tags(n);
  Enumeration out;
  out.best_score = kNegInf;

  for (std::size_t q = 0; q < count; ++q) {
    std::size_t rest = q;
    for (std::size_t t = 0; t < n; ++t) {
      tags[t] = static_cast<int>(rest % T);
      rest /= T;
    }
    double s = b[tags[0]] + em[tags[0]];
    for (std::size_t t = 1; t < n; ++t) {
      s += trans[tags[t - 1] * T + tags[t]] + em[t * T + tags[t]];
    }
    s += e[tags[n - 1]];
    scores[q] = s;
    if (s > out.best_score) {
      out.best_score = s;
      out.best = tags;
    }
  }

  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  out.log_z = mx + std::log(sum);
  out.probs.resize(count);
  for (std::size_t q = 0; q < count; ++q) out.probs[q] = std::exp(scores[q] - out.log_z);
  return out;
}

}  // namespace seqtag::crf
