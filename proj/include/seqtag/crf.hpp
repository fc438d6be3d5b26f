#pragma once

#include <span>
#include <vector>

#include "seqtag/labels.hpp"
#include "seqtag/tensor.hpp"

namespace seqtag::crf {

// Linear-chain CRF parameters. transitions[from][to] scores tag `from`
// followed by tag `to`; begin/end score the first and last tag of a sequence.
struct CrfParams {
  TensorPtr transitions;  // [T×T]
  TensorPtr begin;        // [T]
  TensorPtr end;          // [T]

  std::size_t num_tags() const { return begin->numel(); }

  static CrfParams init(std::size_t num_tags, Rng& rng);  // uniform(-0.1, 0.1)
};

// Global score of one tag sequence:
//   sum_t s_t[y_t] + sum_t T[y_t, y_{t+1}] + begin[y_1] + end[y_n]
// Recorded on the graph, differentiable w.r.t. emissions and parameters.
TensorPtr sequence_score(Graph& g, const TensorPtr& emissions, std::span<const int> tags,
                         const CrfParams& params);

// log of the partition function via the forward recursion in log space:
//   a_1[j] = begin[j] + s_1[j]
//   a_t[j] = s_t[j] + logsumexp_i(a_{t-1}[i] + T[i,j])
//   logZ   = logsumexp_j(a_n[j] + end[j])
TensorPtr log_partition(Graph& g, const TensorPtr& emissions, const CrfParams& params);

// log_partition - sequence_score; the training loss for one sentence.
TensorPtr neg_log_likelihood(Graph& g, const TensorPtr& emissions, std::span<const int> tags,
                             const CrfParams& params);

struct Decode {
  std::vector<int> tags;
  double score;
};

// Max-product mirror of the forward recursion with backpointers. Ties break
// toward the lowest tag index at every max.
Decode viterbi_decode(const Tensor& emissions, const CrfParams& params);

// Viterbi over the masked lattice; masked transitions score -inf. Raises
// when no fully unmasked path exists.
std::vector<int> constrained_decode(const Tensor& emissions, const CrfParams& params,
                                    const TransitionMask& mask);

// Exhaustive scoring of all |T|^n sequences by the Eq-style sum directly.
// Sequences are indexed in colexicographic order (y_1 is the fastest digit),
// the order under which the first strict maximum coincides with Viterbi's
// lowest-index tie-breaking.
struct Enumeration {
  double log_z;
  std::vector<int> best;
  double best_score;
  std::vector<double> probs;  // normalized, one per sequence in colex order
};
Enumeration enumerate_oracle(const Tensor& emissions, const CrfParams& params);

}  // namespace seqtag::crf
