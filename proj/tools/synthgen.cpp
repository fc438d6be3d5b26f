// Generates the bundled synthetic NER corpus. Entities are a deterministic
// function of the token surfaces:
//   PER: a run of "##"-suffixed tokens immediately after the trigger "mr"
//   LOC: a run of "=="-suffixed tokens immediately after the trigger "at"
// Distractors (marked tokens without their trigger, triggers without marked
// tokens) make both the character pattern and the left context necessary.
// Name cores are random, so most dev-split names are OOV at the word level.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "seqtag/rng.hpp"

using seqtag::Rng;

namespace {

constexpr std::uint64_t kCorpusSeed = 20250811;
constexpr std::size_t kTrainSentences = 200;
constexpr std::size_t kDevSentences = 50;

// 30-symbol alphabet: a–z plus the four markers/punctuation
const std::string kLetters = "abcdefghijklmnopqrstuvwxyz";

std::string random_core(Rng& rng, std::size_t lo, std::size_t hi) {
  std::string s;
  const std::size_t len = lo + rng.index(hi - lo + 1);
  for (std::size_t i = 0; i < len; ++i) s.push_back(kLetters[rng.index(kLetters.size())]);
  return s;
}

std::string filler_token(Rng& rng) {
  for (;;) {
    std::string tok = random_core(rng, 2, 5);
    // occasional '+' or '.' inside keeps the full 30-symbol alphabet in play
    if (tok.size() >= 3 && rng.bernoulli(0.15)) {
      tok[1 + rng.index(tok.size() - 2)] = rng.bernoulli(0.5) ? '+' : '.';
    }
    if (tok != "mr" && tok != "at") return tok;
  }
}

std::string name_token(Rng& rng) { return random_core(rng, 2, 4) + "##"; }
std::string loc_token(Rng& rng) { return random_core(rng, 2, 4) + "=="; }

bool is_name(const std::string& t) { return t.size() >= 2 && t.ends_with("##"); }
bool is_loc(const std::string& t) { return t.size() >= 2 && t.ends_with("=="); }

struct Sent {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;  // BIO
};

Sent make_sentence(Rng& rng) {
  Sent s;
  const std::size_t target = 5 + rng.index(8);  // 5..12 tokens
  while (s.tokens.size() < target) {
    const std::string prev = s.tokens.empty() ? "" : s.tokens.back();
    const std::size_t room = target - s.tokens.size();
    const std::uint64_t roll = rng.index(100);

    if (roll < 20 && room >= 2) {  // PER entity
      s.tokens.push_back("mr");
      s.labels.push_back("O");
      const std::size_t run = 1 + rng.index(std::min<std::size_t>(3, room - 1));
      for (std::size_t i = 0; i < run; ++i) {
        s.tokens.push_back(name_token(rng));
        s.labels.push_back(i == 0 ? "B-PER" : "I-PER");
      }
    } else if (roll < 35 && room >= 2) {  // LOC entity
      s.tokens.push_back("at");
      s.labels.push_back("O");
      const std::size_t run = 1 + rng.index(std::min<std::size_t>(2, room - 1));
      for (std::size_t i = 0; i < run; ++i) {
        s.tokens.push_back(loc_token(rng));
        s.labels.push_back(i == 0 ? "B-LOC" : "I-LOC");
      }
    } else if (roll < 45 && prev != "mr" && !is_name(prev)) {  // name distractor
      s.tokens.push_back(name_token(rng));
      s.labels.push_back("O");
    } else if (roll < 53 && prev != "at" && !is_loc(prev)) {  // loc distractor
      s.tokens.push_back(loc_token(rng));
      s.labels.push_back("O");
    } else if (roll < 60 && room >= 2) {  // trigger dud: mr/at with a plain word
      s.tokens.push_back(rng.bernoulli(0.5) ? "mr" : "at");
      s.labels.push_back("O");
      s.tokens.push_back(filler_token(rng));
      s.labels.push_back("O");
    } else {
      s.tokens.push_back(filler_token(rng));
      s.labels.push_back("O");
    }
  }
  return s;
}

void write_split(const std::string& path, const std::vector<Sent>& sentences) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& s : sentences) {
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      out << s.tokens[t] << ' ' << s.labels[t] << '\n';
    }
    out << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "data/synthetic";
  std::filesystem::create_directories(out_dir);

  Rng rng(kCorpusSeed);
  std::vector<Sent> train, dev;
  for (std::size_t i = 0; i < kTrainSentences; ++i) train.push_back(make_sentence(rng));
  for (std::size_t i = 0; i < kDevSentences; ++i) dev.push_back(make_sentence(rng));

  write_split(out_dir + "/train.conll", train);
  write_split(out_dir + "/dev.conll", dev);

  std::size_t train_tokens = 0, dev_tokens = 0, per = 0, loc = 0, dev_oov_names = 0, dev_names = 0;
  std::set<std::string> train_vocab;
  for (const auto& s : train) {
    train_tokens += s.tokens.size();
    for (const auto& t : s.tokens) train_vocab.insert(t);
    for (const auto& l : s.labels) {
      if (l == "B-PER") ++per;
      if (l == "B-LOC") ++loc;
    }
  }
  for (const auto& s : dev) {
    dev_tokens += s.tokens.size();
    for (const auto& t : s.tokens) {
      if (is_name(t) || is_loc(t)) {
        ++dev_names;
        if (!train_vocab.count(t)) ++dev_oov_names;
      }
    }
  }
  std::printf("train: %zu sentences, %zu tokens, %zu PER, %zu LOC entities\n", train.size(),
              train_tokens, per, loc);
  std::printf("dev:   %zu sentences, %zu tokens, %zu/%zu marked tokens OOV\n", dev.size(),
              dev_tokens, dev_oov_names, dev_names);
  return 0;
}
