#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seqtag/crf.hpp"
#include "seqtag/data.hpp"
#include "seqtag/encoder.hpp"
#include "seqtag/tensor.hpp"

namespace seqtag {

struct ModelDims {
  std::size_t char_dim = 30;
  std::size_t char_filters = 30;
  std::size_t char_kernel = 3;
  std::size_t word_dim = 100;
  std::size_t hidden = 100;  // per direction
};

struct ModelFlags {
  bool use_char_cnn = true;
  bool use_bilstm = true;
  bool use_crf = true;
  bool freeze_embeddings = false;
  double dropout_rate = 0.5;
};

// Full tagger: word embeddings, optional char CNN, optional BiLSTM, linear
// emission layer, optional CRF. Without the CRF the loss degrades to
// per-token softmax cross-entropy and decoding to per-position argmax.
class Model {
 public:
  Model(const ModelDims& dims, const ModelFlags& flags, Vocabs vocabs, std::uint64_t seed);

  // Replaces the word-embedding values (e.g. with pretrained rows). Shape
  // must match the initialized matrix.
  void install_word_embeddings(const EmbeddingMatrix& matrix);

  TensorPtr emission_scores(Graph& g, const EncodedSentence& sentence, bool train);
  TensorPtr sentence_loss(Graph& g, const EncodedSentence& sentence, bool train);

  std::vector<int> predict(const EncodedSentence& sentence);
  std::vector<std::string> predict_labels(const EncodedSentence& sentence);

  // Fixed-order parameter inventory: checkpoint layout, SGD state, clip
  // grouping and grad-check groups all key off this order.
  std::vector<std::pair<std::string, TensorPtr>> named_params() const;

  const Vocabs& vocabs() const { return vocabs_; }
  const ModelDims& dims() const { return dims_; }
  const ModelFlags& flags() const { return flags_; }
  const crf::CrfParams& crf_params() const;
  Rng& rng() { return rng_; }

 private:
  DropoutCtx dropout_ctx(bool train);

  ModelDims dims_;
  ModelFlags flags_;
  Vocabs vocabs_;
  Rng rng_;

  TensorPtr word_emb_;
  CharCnnParams char_cnn_;
  BiLstmParams bilstm_;
  EmissionParams emission_;
  crf::CrfParams crf_;
};

}  // namespace seqtag
