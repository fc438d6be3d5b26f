#pragma once

#include <span>
#include <vector>

#include "seqtag/tensor.hpp"

namespace seqtag {

// Threaded through the encoder so train/eval mode is explicit, never inferred.
struct DropoutCtx {
  bool active = false;
  double rate = 0.5;
  Rng* rng = nullptr;
};

struct CharCnnParams {
  TensorPtr embeddings;  // |C| × d_c
  TensorPtr conv_w;      // n_f × (k·d_c)
  TensorPtr conv_b;      // n_f
  std::size_t kernel = 3;

  std::size_t embed_dim() const { return embeddings->dim(1); }
  std::size_t num_filters() const { return conv_b->numel(); }

  static CharCnnParams init(std::size_t vocab_size, std::size_t embed_dim,
                            std::size_t num_filters, std::size_t kernel, Rng& rng);
};

// One LSTM direction: input/forget/output gates and the cell candidate.
struct LstmDirection {
  TensorPtr w_input, w_forget, w_output, w_cell;  // h × d
  TensorPtr u_input, u_forget, u_output, u_cell;  // h × h
  TensorPtr b_input, b_forget, b_output, b_cell;  // h
};

struct BiLstmParams {
  LstmDirection fwd, bwd;
  std::size_t hidden = 0;

  static BiLstmParams init(std::size_t input_dim, std::size_t hidden, Rng& rng);
};

struct EmissionParams {
  TensorPtr weight;  // |T| × in
  TensorPtr bias;    // |T|

  static EmissionParams init(std::size_t input_dim, std::size_t num_tags, Rng& rng);
};

// Character CNN over one word: embed, pad 2 on each side, slide width-k
// windows, tanh, max-pool over the word. Output length is num_filters for
// any word length. Dropout hits the pooled vector.
TensorPtr char_cnn_forward(Graph& g, std::span<const int> chars, const CharCnnParams& params,
                           const DropoutCtx& dropout_ctx);

// [word embedding; char CNN output], word part first. cnn == nullptr drops
// the char branch (word-only ablation).
TensorPtr embed_token(Graph& g, int word_index, std::span<const int> chars,
                      const TensorPtr& word_embeddings, const CharCnnParams* cnn,
                      const DropoutCtx& dropout_ctx);

// Both directions from zero initial states; output t is [fwd_t; bwd_t] with
// dropout on each output when active.
std::vector<TensorPtr> bilstm_forward(Graph& g, std::span<const TensorPtr> inputs,
                                      const BiLstmParams& params, const DropoutCtx& dropout_ctx);

// Tag scores, row t = W h_t + b. [n × |T|]
TensorPtr emissions(Graph& g, std::span<const TensorPtr> states, const EmissionParams& params);

}  // namespace seqtag
