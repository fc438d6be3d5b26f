#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "seqtag/encoder.hpp"

using namespace seqtag;

namespace {

const DropoutCtx kNoDropout{};

CharCnnParams hand_cnn(std::size_t vocab, std::size_t d_c, std::size_t n_f, std::size_t k,
                       std::vector<double> emb, std::vector<double> w, std::vector<double> b) {
  CharCnnParams p;
  p.embeddings = Tensor::from_data({vocab, d_c}, std::move(emb), true);
  p.conv_w = Tensor::from_data({n_f, k * d_c}, std::move(w), true);
  p.conv_b = Tensor::from_data({n_f}, std::move(b), true);
  p.kernel = k;
  return p;
}

// scalar LSTM (h = 1, d = 1) executed by hand
struct ScalarLstm {
  double wi, wf, wo, wc, ui, uf, uo, uc, bi, bf, bo, bc;

  static double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  std::pair<double, double> step(double x, double h, double c) const {
    const double i = sig(wi * x + ui * h + bi);
    const double f = sig(wf * x + uf * h + bf);
    const double o = sig(wo * x + uo * h + bo);
    const double g = std::tanh(wc * x + uc * h + bc);
    const double c2 = f * c + i * g;
    return {o * std::tanh(c2), c2};
  }
};

LstmDirection as_direction(const ScalarLstm& s) {
  LstmDirection d;
  d.w_input = Tensor::from_data({1, 1}, {s.wi}, true);
  d.w_forget = Tensor::from_data({1, 1}, {s.wf}, true);
  d.w_output = Tensor::from_data({1, 1}, {s.wo}, true);
  d.w_cell = Tensor::from_data({1, 1}, {s.wc}, true);
  d.u_input = Tensor::from_data({1, 1}, {s.ui}, true);
  d.u_forget = Tensor::from_data({1, 1}, {s.uf}, true);
  d.u_output = Tensor::from_data({1, 1}, {s.uo}, true);
  d.u_cell = Tensor::from_data({1, 1}, {s.uc}, true);
  d.b_input = Tensor::from_data({1}, {s.bi}, true);
  d.b_forget = Tensor::from_data({1}, {s.bf}, true);
  d.b_output = Tensor::from_data({1}, {s.bo}, true);
  d.b_cell = Tensor::from_data({1}, {s.bc}, true);
  return d;
}

}  // namespace

TEST_CASE("char cnn with zero weights pools to the zero vector") {
  auto p = hand_cnn(4, 2, 3, 3, std::vector<double>(8, 0.7), std::vector<double>(18, 0.0),
                    std::vector<double>(3, 0.0));
  Graph g;
  const int word[] = {2};
  auto r = char_cnn_forward(g, word, p, kNoDropout);
  REQUIRE(r->numel() == 3);
  for (double v : r->data()) CHECK(v == 0.0);
}

TEST_CASE("char cnn matches a hand-unrolled window computation") {
  // 3-char word, d_c = 1, 2 filters, kernel 3, pad index 0
  const std::vector<double> emb{0.05, 0.3, -0.4, 0.2};  // rows: pad, a, b, c
  const std::vector<double> w{0.1, -0.2, 0.3, -0.5, 0.4, 0.25};
  const std::vector<double> b{0.01, -0.02};
  auto p = hand_cnn(4, 1, 2, 3, emb, w, b);

  const int word[] = {1, 2, 3};  // "abc"
  Graph g;
  auto r = char_cnn_forward(g, word, p, kNoDropout);

  // padded char stream: pad pad a b c pad pad
  const std::vector<double> stream{emb[0], emb[0], emb[1], emb[2], emb[3], emb[0], emb[0]};
  double best[2] = {-1e9, -1e9};
  for (std::size_t win = 0; win + 3 <= stream.size(); ++win) {
    for (std::size_t f = 0; f < 2; ++f) {
      double act = b[f];
      for (std::size_t j = 0; j < 3; ++j) act += w[f * 3 + j] * stream[win + j];
      best[f] = std::max(best[f], std::tanh(act));
    }
  }
  CHECK(r->data()[0] == doctest::Approx(best[0]).epsilon(1e-14));
  CHECK(r->data()[1] == doctest::Approx(best[1]).epsilon(1e-14));
}

TEST_CASE("char cnn output length is num_filters for every word length") {
  Rng rng(8);
  auto p = CharCnnParams::init(10, 4, 5, 3, rng);
  for (std::size_t m = 1; m <= 6; ++m) {
    std::vector<int> word(m);
    for (auto& c : word) c = static_cast<int>(1 + rng.index(9));
    Graph g;
    CHECK(char_cnn_forward(g, word, p, kNoDropout)->numel() == 5);
  }
  const int bad[] = {12};
  Graph g;
  CHECK_THROWS_AS(char_cnn_forward(g, bad, p, kNoDropout), Error);
  CHECK_THROWS_AS(char_cnn_forward(g, std::span<const int>{}, p, kNoDropout), Error);
}

TEST_CASE("embed_token concatenates word part first") {
  Rng rng(9);
  auto word_emb = Tensor::from_data({3, 2}, {0, 0, 5, 6, 1, 2}, true);
  auto cnn = CharCnnParams::init(4, 2, 3, 3, rng);
  Graph g;
  const int chars[] = {1, 2};
  auto x = embed_token(g, 1, chars, word_emb, &cnn, kNoDropout);
  REQUIRE(x->numel() == 5);
  CHECK(x->data()[0] == 5.0);
  CHECK(x->data()[1] == 6.0);
  auto rc = char_cnn_forward(g, chars, cnn, kNoDropout);
  for (std::size_t i = 0; i < 3; ++i) CHECK(x->data()[2 + i] == rc->data()[i]);

  // word-only ablation drops the char part
  CHECK(embed_token(g, 1, chars, word_emb, nullptr, kNoDropout)->numel() == 2);

  CHECK_THROWS_AS(embed_token(g, 7, chars, word_emb, &cnn, kNoDropout), Error);
}

TEST_CASE("embed_token output length under the published configuration") {
  Rng rng(10);
  auto word_emb = Tensor::uniform({5, 100}, -0.1, 0.1, rng, true);
  auto cnn = CharCnnParams::init(6, 30, 30, 3, rng);
  Graph g;
  const int chars[] = {1, 2, 3};
  CHECK(embed_token(g, 2, chars, word_emb, &cnn, kNoDropout)->numel() == 130);
}

TEST_CASE("bilstm with all-zero parameters emits zeros") {
  BiLstmParams p;
  p.hidden = 2;
  auto zero_dir = [&]() {
    ScalarLstm z{};
    LstmDirection d;
    d.w_input = Tensor::zeros({2, 3}, true);
    d.w_forget = Tensor::zeros({2, 3}, true);
    d.w_output = Tensor::zeros({2, 3}, true);
    d.w_cell = Tensor::zeros({2, 3}, true);
    d.u_input = Tensor::zeros({2, 2}, true);
    d.u_forget = Tensor::zeros({2, 2}, true);
    d.u_output = Tensor::zeros({2, 2}, true);
    d.u_cell = Tensor::zeros({2, 2}, true);
    d.b_input = Tensor::zeros({2}, true);
    d.b_forget = Tensor::zeros({2}, true);
    d.b_output = Tensor::zeros({2}, true);
    d.b_cell = Tensor::zeros({2}, true);
    (void)z;
    return d;
  };
  p.fwd = zero_dir();
  p.bwd = zero_dir();

  Rng rng(4);
  std::vector<TensorPtr> xs;
  for (int t = 0; t < 3; ++t) xs.push_back(Tensor::uniform({3}, -1, 1, rng));
  Graph g;
  auto out = bilstm_forward(g, xs, p, kNoDropout);
  REQUIRE(out.size() == 3);
  for (const auto& h : out) {
    REQUIRE(h->numel() == 4);
    for (double v : h->data()) CHECK(v == 0.0);
  }
}

TEST_CASE("bilstm matches a hand-executed scalar recursion") {
  const ScalarLstm fwd{0.5, -0.3, 0.8, 1.1, 0.2, 0.4, -0.6, 0.9, 0.05, 1.0, -0.1, 0.0};
  const ScalarLstm bwd{-0.7, 0.6, 0.3, -0.2, 0.15, -0.5, 0.45, 0.1, -0.05, 1.0, 0.2, 0.3};
  BiLstmParams p;
  p.hidden = 1;
  p.fwd = as_direction(fwd);
  p.bwd = as_direction(bwd);

  const std::vector<double> x{0.4, -1.2, 0.9};
  std::vector<TensorPtr> xs;
  for (double v : x) xs.push_back(Tensor::from_data({1}, {v}));

  Graph g;
  auto out = bilstm_forward(g, xs, p, kNoDropout);

  double h = 0, c = 0;
  std::vector<double> fwd_h;
  for (double v : x) {
    std::tie(h, c) = fwd.step(v, h, c);
    fwd_h.push_back(h);
  }
  h = 0;
  c = 0;
  std::vector<double> bwd_h(3);
  for (int t = 2; t >= 0; --t) {
    std::tie(h, c) = bwd.step(x[static_cast<std::size_t>(t)], h, c);
    bwd_h[static_cast<std::size_t>(t)] = h;
  }
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(out[t]->data()[0] == doctest::Approx(fwd_h[t]).epsilon(1e-14));
    CHECK(out[t]->data()[1] == doctest::Approx(bwd_h[t]).epsilon(1e-14));
  }

  // n = 1: both directions see only x_1 from zero states
  Graph g1;
  auto single = bilstm_forward(g1, std::vector<TensorPtr>{xs[0]}, p, kNoDropout);
  auto [fh, fc] = fwd.step(x[0], 0, 0);
  auto [bh, bc] = bwd.step(x[0], 0, 0);
  (void)fc;
  (void)bc;
  CHECK(single[0]->data()[0] == doctest::Approx(fh).epsilon(1e-14));
  CHECK(single[0]->data()[1] == doctest::Approx(bh).epsilon(1e-14));
}

TEST_CASE("emission layer") {
  Rng rng(12);

  // zero weights: every row is the bias
  EmissionParams zero;
  zero.weight = Tensor::zeros({3, 4}, true);
  zero.bias = Tensor::from_data({3}, {0.1, 0.2, 0.3}, true);
  std::vector<TensorPtr> hs{Tensor::uniform({4}, -1, 1, rng), Tensor::uniform({4}, -1, 1, rng)};
  Graph g;
  auto em = emissions(g, hs, zero);
  REQUIRE(em->shape() == std::vector<std::size_t>{2, 3});
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t j = 0; j < 3; ++j) CHECK((*em)(t, j) == zero.bias->data()[j]);
  }

  // identity weights copy coordinates
  EmissionParams ident;
  ident.weight = Tensor::from_data({4, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}, true);
  ident.bias = Tensor::zeros({4}, true);
  auto em2 = emissions(g, hs, ident);
  for (std::size_t j = 0; j < 4; ++j) CHECK((*em2)(0, j) == hs[0]->data()[j]);

  // seeded weights against the naive matmul oracle
  EmissionParams p = EmissionParams::init(4, 3, rng);
  auto em3 = emissions(g, hs, p);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t j = 0; j < 3; ++j) {
      double expect = p.bias->data()[j];
      for (std::size_t l = 0; l < 4; ++l) expect += (*p.weight)(j, l) * hs[t]->data()[l];
      CHECK(std::fabs((*em3)(t, j) - expect) <= 1e-12);
    }
  }
}

TEST_CASE("encoder is deterministic with dropout inactive, stochastic with it active") {
  Rng rng(21);
  auto cnn = CharCnnParams::init(8, 3, 4, 3, rng);
  auto word_emb = Tensor::uniform({6, 5}, -0.5, 0.5, rng, true);
  BiLstmParams lstm = BiLstmParams::init(9, 4, rng);
  EmissionParams emit = EmissionParams::init(8, 3, rng);

  auto run = [&](const DropoutCtx& ctx) {
    Graph g;
    std::vector<TensorPtr> xs;
    const std::vector<std::vector<int>> words{{1, 2}, {3}, {4, 5, 1}};
    for (std::size_t t = 0; t < words.size(); ++t) {
      xs.push_back(embed_token(g, static_cast<int>(t + 1), words[t], word_emb, &cnn, ctx));
    }
    auto hs = bilstm_forward(g, xs, lstm, ctx);
    return emissions(g, hs, emit);
  };

  auto a = run(kNoDropout);
  auto b = run(kNoDropout);
  for (std::size_t i = 0; i < a->numel(); ++i) CHECK(a->data()[i] == b->data()[i]);

  Rng drop_rng(5);
  DropoutCtx active{true, 0.5, &drop_rng};
  auto c = run(active);
  bool any_difference = false;
  for (std::size_t i = 0; i < a->numel(); ++i) {
    if (a->data()[i] != c->data()[i]) any_difference = true;
  }
  CHECK(any_difference);

  // same dropout seed, same stream
  Rng drop_rng2(5);
  DropoutCtx active2{true, 0.5, &drop_rng2};
  auto d = run(active2);
  for (std::size_t i = 0; i < c->numel(); ++i) CHECK(c->data()[i] == d->data()[i]);
}

TEST_CASE("mean-squared emission loss passes grad_check for every group") {
  Rng rng(33);
  auto cnn = CharCnnParams::init(7, 3, 4, 3, rng);
  auto word_emb = Tensor::uniform({5, 6}, -0.5, 0.5, rng, true);
  BiLstmParams lstm = BiLstmParams::init(10, 5, rng);
  EmissionParams emit = EmissionParams::init(10, 4, rng);
  auto target = Tensor::uniform({3, 4}, -1, 1, rng);

  const std::vector<std::vector<int>> words{{1, 2, 3}, {4}, {2, 5, 6, 1}};

  auto f = [&](Graph& g) {
    std::vector<TensorPtr> xs;
    for (std::size_t t = 0; t < words.size(); ++t) {
      xs.push_back(embed_token(g, static_cast<int>(t + 1), words[t], word_emb, &cnn, kNoDropout));
    }
    auto em = emissions(g, bilstm_forward(g, xs, lstm, kNoDropout), emit);
    auto diff = sub(g, em, target);
    return sum(g, mul(g, diff, diff));
  };

  std::vector<std::pair<std::string, TensorPtr>> params{
      {"word_emb", word_emb}, {"char_emb", cnn.embeddings}, {"conv_w", cnn.conv_w},
      {"conv_b", cnn.conv_b}, {"emission_w", emit.weight},  {"emission_b", emit.bias},
  };
  auto dir = [&](const char* prefix, const LstmDirection& d) {
    params.emplace_back(std::string(prefix) + ".w_input", d.w_input);
    params.emplace_back(std::string(prefix) + ".u_forget", d.u_forget);
    params.emplace_back(std::string(prefix) + ".b_cell", d.b_cell);
    params.emplace_back(std::string(prefix) + ".w_output", d.w_output);
  };
  dir("fwd", lstm.fwd);
  dir("bwd", lstm.bwd);

  for (const auto& gc : grad_check(f, params)) {
    INFO(gc.group);
    CHECK(gc.max_rel_err <= 1e-4);
  }
}
