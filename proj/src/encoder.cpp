#include "seqtag/encoder.hpp"

#include <cmath>

namespace seqtag {

namespace {

constexpr std::size_t kCharPad = 2;  // symmetric padding around each word
constexpr int kPadIndex = 0;

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

double embed_bound(std::size_t dim) { return std::sqrt(3.0 / static_cast<double>(dim)); }

TensorPtr maybe_dropout(Graph& g, const TensorPtr& x, const DropoutCtx& ctx) {
  if (!ctx.active) return x;
  if (ctx.rng == nullptr) raise(ErrorKind::contract, "dropout active without an rng");
  return dropout(g, x, ctx.rate, *ctx.rng);
}

// one LSTM step; returns (h, c)
std::pair<TensorPtr, TensorPtr> lstm_step(Graph& g, const LstmDirection& p, const TensorPtr& x,
                                          const TensorPtr& h_prev, const TensorPtr& c_prev) {
  auto gate = [&](const TensorPtr& w, const TensorPtr& u, const TensorPtr& b) {
    return add(g, add(g, matmul(g, w, x), matmul(g, u, h_prev)), b);
  };
  TensorPtr in_gate = sigmoid(g, gate(p.w_input, p.u_input, p.b_input));
  TensorPtr forget_gate = sigmoid(g, gate(p.w_forget, p.u_forget, p.b_forget));
  TensorPtr out_gate = sigmoid(g, gate(p.w_output, p.u_output, p.b_output));
  TensorPtr candidate = tanh(g, gate(p.w_cell, p.u_cell, p.b_cell));
  TensorPtr cell = add(g, mul(g, forget_gate, c_prev), mul(g, in_gate, candidate));
  TensorPtr hidden = mul(g, out_gate, tanh(g, cell));
  return {hidden, cell};
}

}  // namespace

CharCnnParams CharCnnParams::init(std::size_t vocab_size, std::size_t embed_dim,
                                  std::size_t num_filters, std::size_t kernel, Rng& rng) {
  if (kernel < 1 || num_filters < 1) {
    raise(ErrorKind::contract, "char CNN needs kernel >= 1 and num_filters >= 1");
  }
  CharCnnParams p;
  const double eb = embed_bound(embed_dim);
  p.embeddings = Tensor::uniform({vocab_size, embed_dim}, -eb, eb, rng, true);
  const double wb = glorot_bound(kernel * embed_dim, num_filters);
  p.conv_w = Tensor::uniform({num_filters, kernel * embed_dim}, -wb, wb, rng, true);
  p.conv_b = Tensor::zeros({num_filters}, true);
  p.kernel = kernel;
  return p;
}

BiLstmParams BiLstmParams::init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
  auto direction = [&](LstmDirection& d) {
    const double wb = glorot_bound(input_dim, hidden);
    d.w_input = Tensor::uniform({hidden, input_dim}, -wb, wb, rng, true);
    d.w_forget = Tensor::uniform({hidden, input_dim}, -wb, wb, rng, true);
    d.w_output = Tensor::uniform({hidden, input_dim}, -wb, wb, rng, true);
    d.w_cell = Tensor::uniform({hidden, input_dim}, -wb, wb, rng, true);
    const double ub = glorot_bound(hidden, hidden);
    d.u_input = Tensor::uniform({hidden, hidden}, -ub, ub, rng, true);
    d.u_forget = Tensor::uniform({hidden, hidden}, -ub, ub, rng, true);
    d.u_output = Tensor::uniform({hidden, hidden}, -ub, ub, rng, true);
    d.u_cell = Tensor::uniform({hidden, hidden}, -ub, ub, rng, true);
    d.b_input = Tensor::zeros({hidden}, true);
    d.b_forget = Tensor::full({hidden}, 1.0, true);  // stabilizes early training
    d.b_output = Tensor::zeros({hidden}, true);
    d.b_cell = Tensor::zeros({hidden}, true);
  };
  BiLstmParams p;
  p.hidden = hidden;
  direction(p.fwd);
  direction(p.bwd);
  return p;
}

EmissionParams EmissionParams::init(std::size_t input_dim, std::size_t num_tags, Rng& rng) {
  EmissionParams p;
  const double wb = glorot_bound(input_dim, num_tags);
  p.weight = Tensor::uniform({num_tags, input_dim}, -wb, wb, rng, true);
  p.bias = Tensor::zeros({num_tags}, true);
  return p;
}

TensorPtr char_cnn_forward(Graph& g, std::span<const int> chars, const CharCnnParams& params,
                           const DropoutCtx& dropout_ctx) {
  if (chars.empty()) raise(ErrorKind::domain, "char_cnn_forward: empty word");
  const std::size_t vocab = params.embeddings->dim(0);
  for (int c : chars) {
    if (c < 0 || static_cast<std::size_t>(c) >= vocab) {
      raise(ErrorKind::vocabulary, "char index " + std::to_string(c) + " outside vocabulary of " +
                                       std::to_string(vocab));
    }
  }

  // pad participates like any character, through its learned embedding row
  std::vector<int> padded(chars.size() + 2 * kCharPad, kPadIndex);
  std::copy(chars.begin(), chars.end(), padded.begin() + kCharPad);

  const std::size_t k = params.kernel;
  if (padded.size() < k) raise(ErrorKind::domain, "char_cnn_forward: kernel wider than padded word");
  const std::size_t windows = padded.size() - k + 1;

  std::vector<TensorPtr> window_scores;
  window_scores.reserve(windows);
  std::vector<TensorPtr> parts(k);
  for (std::size_t w = 0; w < windows; ++w) {
    for (std::size_t j = 0; j < k; ++j) {
      parts[j] = row(g, params.embeddings, static_cast<std::size_t>(padded[w + j]));
    }
    TensorPtr window = concat(g, parts);
    window_scores.push_back(add(g, matmul(g, params.conv_w, window), params.conv_b));
  }
  TensorPtr activations = tanh(g, stack_rows(g, window_scores));
  TensorPtr pooled = max_over_rows(g, activations).values;
  return maybe_dropout(g, pooled, dropout_ctx);
}

TensorPtr embed_token(Graph& g, int word_index, std::span<const int> chars,
                      const TensorPtr& word_embeddings, const CharCnnParams* cnn,
                      const DropoutCtx& dropout_ctx) {
  if (word_index < 0 || static_cast<std::size_t>(word_index) >= word_embeddings->dim(0)) {
    raise(ErrorKind::vocabulary, "word index " + std::to_string(word_index) + " outside vocabulary");
  }
  TensorPtr word_part = row(g, word_embeddings, static_cast<std::size_t>(word_index));
  if (cnn == nullptr) return word_part;
  TensorPtr char_part = char_cnn_forward(g, chars, *cnn, dropout_ctx);
  const TensorPtr parts[] = {word_part, char_part};
  return concat(g, parts);
}

std::vector<TensorPtr> bilstm_forward(Graph& g, std::span<const TensorPtr> inputs,
                                      const BiLstmParams& params, const DropoutCtx& dropout_ctx) {
  if (inputs.empty()) raise(ErrorKind::domain, "bilstm_forward: empty sequence");
  const std::size_t n = inputs.size();
  const std::size_t h = params.hidden;

  std::vector<TensorPtr> fwd(n), bwd(n);
  TensorPtr h_state = Tensor::zeros({h});
  TensorPtr c_state = Tensor::zeros({h});
  for (std::size_t t = 0; t < n; ++t) {
    auto [ht, ct] = lstm_step(g, params.fwd, inputs[t], h_state, c_state);
    fwd[t] = ht;
    h_state = ht;
    c_state = ct;
  }
  h_state = Tensor::zeros({h});
  c_state = Tensor::zeros({h});
  for (std::size_t t = n; t > 0; --t) {
    auto [ht, ct] = lstm_step(g, params.bwd, inputs[t - 1], h_state, c_state);
    bwd[t - 1] = ht;
    h_state = ht;
    c_state = ct;
  }

  std::vector<TensorPtr> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const TensorPtr parts[] = {fwd[t], bwd[t]};
    out[t] = maybe_dropout(g, concat(g, parts), dropout_ctx);
  }
  return out;
}

TensorPtr emissions(Graph& g, std::span<const TensorPtr> states, const EmissionParams& params) {
  if (states.empty()) raise(ErrorKind::domain, "emissions: empty sequence");
  std::vector<TensorPtr> rows;
  rows.reserve(states.size());
  for (const auto& h : states) {
    rows.push_back(add(g, matmul(g, params.weight, h), params.bias));
  }
  return stack_rows(g, rows);
}

}  // namespace seqtag
