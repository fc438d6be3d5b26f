#include "seqtag/model.hpp"

#include <algorithm>
#include <cmath>

namespace seqtag {

Model::Model(const ModelDims& dims, const ModelFlags& flags, Vocabs vocabs, std::uint64_t seed)
    : dims_(dims), flags_(flags), vocabs_(std::move(vocabs)), rng_(seed) {
  const std::size_t num_tags = vocabs_.labels.size();
  if (num_tags == 0) raise(ErrorKind::contract, "model needs a nonempty label set");

  // Draw order is fixed; a given seed always yields the same parameters.
  const double wb = std::sqrt(3.0 / static_cast<double>(dims_.word_dim));
  word_emb_ = Tensor::uniform({vocabs_.words.size(), dims_.word_dim}, -wb, wb, rng_,
                              !flags_.freeze_embeddings);

  std::size_t token_dim = dims_.word_dim;
  if (flags_.use_char_cnn) {
    char_cnn_ = CharCnnParams::init(vocabs_.chars.size(), dims_.char_dim, dims_.char_filters,
                                    dims_.char_kernel, rng_);
    token_dim += dims_.char_filters;
  }

  std::size_t emission_in = token_dim;
  if (flags_.use_bilstm) {
    bilstm_ = BiLstmParams::init(token_dim, dims_.hidden, rng_);
    emission_in = 2 * dims_.hidden;
  }
  emission_ = EmissionParams::init(emission_in, num_tags, rng_);

  if (flags_.use_crf) {
    crf_ = crf::CrfParams::init(num_tags, rng_);
  }
}

void Model::install_word_embeddings(const EmbeddingMatrix& matrix) {
  if (matrix.rows != word_emb_->dim(0) || matrix.dim != word_emb_->dim(1)) {
    raise(ErrorKind::dimension, "embedding matrix " + std::to_string(matrix.rows) + "x" +
                                    std::to_string(matrix.dim) + " does not fit model " +
                                    word_emb_->shape_str());
  }
  std::copy(matrix.data.begin(), matrix.data.end(), word_emb_->data().begin());
}

DropoutCtx Model::dropout_ctx(bool train) {
  DropoutCtx ctx;
  ctx.active = train && flags_.dropout_rate > 0.0;
  ctx.rate = flags_.dropout_rate;
  ctx.rng = &rng_;
  return ctx;
}

TensorPtr Model::emission_scores(Graph& g, const EncodedSentence& sentence, bool train) {
  if (sentence.size() == 0) raise(ErrorKind::contract, "empty sentence");
  const DropoutCtx ctx = dropout_ctx(train);

  std::vector<TensorPtr> tokens;
  tokens.reserve(sentence.size());
  for (std::size_t t = 0; t < sentence.size(); ++t) {
    tokens.push_back(embed_token(g, sentence.word_ids[t], sentence.char_ids[t], word_emb_,
                                 flags_.use_char_cnn ? &char_cnn_ : nullptr, ctx));
  }

  if (flags_.use_bilstm) {
    std::vector<TensorPtr> states = bilstm_forward(g, tokens, bilstm_, ctx);
    return emissions(g, states, emission_);
  }
  return emissions(g, tokens, emission_);
}

TensorPtr Model::sentence_loss(Graph& g, const EncodedSentence& sentence, bool train) {
  if (sentence.label_ids.size() != sentence.size()) {
    raise(ErrorKind::contract, "sentence_loss needs one gold label per token");
  }
  for (int lab : sentence.label_ids) {
    if (lab < 0) raise(ErrorKind::contract, "gold label outside the model label set");
  }
  TensorPtr em = emission_scores(g, sentence, train);

  if (flags_.use_crf) {
    return crf::neg_log_likelihood(g, em, sentence.label_ids, crf_);
  }
  // per-token cross-entropy: sum_t (logsumexp(s_t) - s_t[gold_t])
  TensorPtr loss = Tensor::zeros({});
  for (std::size_t t = 0; t < sentence.size(); ++t) {
    TensorPtr r = row(g, em, t);
    TensorPtr ce = sub(g, logsumexp(g, r),
                       element(g, r, static_cast<std::size_t>(sentence.label_ids[t])));
    loss = t == 0 ? ce : add(g, loss, ce);
  }
  return loss;
}

std::vector<int> Model::predict(const EncodedSentence& sentence) {
  Graph g;
  TensorPtr em = emission_scores(g, sentence, /*train=*/false);
  if (flags_.use_crf) {
    return crf::viterbi_decode(*em, crf_).tags;
  }
  std::vector<int> tags(sentence.size(), 0);
  const std::size_t T = em->dim(1);
  for (std::size_t t = 0; t < sentence.size(); ++t) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < T; ++j) {
      if ((*em)(t, j) > (*em)(t, arg)) arg = j;  // ties keep the lowest index
    }
    tags[t] = static_cast<int>(arg);
  }
  return tags;
}

std::vector<std::string> Model::predict_labels(const EncodedSentence& sentence) {
  std::vector<std::string> out;
  for (int tag : predict(sentence)) out.push_back(vocabs_.labels.names[tag]);
  return out;
}

std::vector<std::pair<std::string, TensorPtr>> Model::named_params() const {
  std::vector<std::pair<std::string, TensorPtr>> params;
  params.emplace_back("word_emb", word_emb_);
  if (flags_.use_char_cnn) {
    params.emplace_back("char_emb", char_cnn_.embeddings);
    params.emplace_back("conv_w", char_cnn_.conv_w);
    params.emplace_back("conv_b", char_cnn_.conv_b);
  }
  if (flags_.use_bilstm) {
    auto dir = [&](const char* prefix, const LstmDirection& d) {
      params.emplace_back(std::string(prefix) + ".w_input", d.w_input);
      params.emplace_back(std::string(prefix) + ".w_forget", d.w_forget);
      params.emplace_back(std::string(prefix) + ".w_output", d.w_output);
      params.emplace_back(std::string(prefix) + ".w_cell", d.w_cell);
      params.emplace_back(std::string(prefix) + ".u_input", d.u_input);
      params.emplace_back(std::string(prefix) + ".u_forget", d.u_forget);
      params.emplace_back(std::string(prefix) + ".u_output", d.u_output);
      params.emplace_back(std::string(prefix) + ".u_cell", d.u_cell);
      params.emplace_back(std::string(prefix) + ".b_input", d.b_input);
      params.emplace_back(std::string(prefix) + ".b_forget", d.b_forget);
      params.emplace_back(std::string(prefix) + ".b_output", d.b_output);
      params.emplace_back(std::string(prefix) + ".b_cell", d.b_cell);
    };
    dir("lstm_fwd", bilstm_.fwd);
    dir("lstm_bwd", bilstm_.bwd);
  }
  params.emplace_back("emission_w", emission_.weight);
  params.emplace_back("emission_b", emission_.bias);
  if (flags_.use_crf) {
    params.emplace_back("crf_transitions", crf_.transitions);
    params.emplace_back("crf_begin", crf_.begin);
    params.emplace_back("crf_end", crf_.end);
  }
  return params;
}

const crf::CrfParams& Model::crf_params() const {
  if (!flags_.use_crf) raise(ErrorKind::contract, "model was built without a CRF");
  return crf_;
}

}  // namespace seqtag
