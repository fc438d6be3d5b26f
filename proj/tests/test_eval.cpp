#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "seqtag/data.hpp"
#include "seqtag/eval.hpp"
#include "seqtag/rng.hpp"

using namespace seqtag;

using Tags = std::vector<std::string>;
using Corpus = std::vector<Tags>;

TEST_CASE("extract_entities on well-formed input") {
  CHECK(extract_entities(Tags{"B-PER", "E-PER", "O", "S-LOC"}) ==
        std::vector<EntitySpan>{{"PER", 0, 1}, {"LOC", 3, 3}});
  CHECK(extract_entities(Tags{"O", "O", "O"}).empty());
  CHECK(extract_entities(Tags{"B-ORG", "I-ORG", "I-ORG", "E-ORG"}) ==
        std::vector<EntitySpan>{{"ORG", 0, 3}});
  CHECK(extract_entities(Tags{"S-MISC"}) == std::vector<EntitySpan>{{"MISC", 0, 0}});
}

TEST_CASE("extract_entities lenient rules for malformed input") {
  // bare continuation starts a span
  CHECK(extract_entities(Tags{"I-ORG", "E-ORG"}) == std::vector<EntitySpan>{{"ORG", 0, 1}});
  CHECK(extract_entities(Tags{"O", "I-PER", "O"}) == std::vector<EntitySpan>{{"PER", 1, 1}});
  // type change closes the open span
  CHECK(extract_entities(Tags{"B-PER", "I-LOC", "E-LOC"}) ==
        std::vector<EntitySpan>{{"PER", 0, 0}, {"LOC", 1, 2}});
  // unclosed at sentence end still counts
  CHECK(extract_entities(Tags{"O", "B-LOC", "I-LOC"}) == std::vector<EntitySpan>{{"LOC", 1, 2}});
  // bare E is a single-token span
  CHECK(extract_entities(Tags{"O", "E-ORG"}) == std::vector<EntitySpan>{{"ORG", 1, 1}});
  // B directly followed by B emits the first as length-1
  CHECK(extract_entities(Tags{"B-PER", "B-PER", "E-PER"}) ==
        std::vector<EntitySpan>{{"PER", 0, 0}, {"PER", 1, 2}});
  CHECK_THROWS_AS(extract_entities(Tags{"Q-PER"}), Error);
}

TEST_CASE("entity_f1 degenerate and perfect cases") {
  const Corpus gold{{"B-PER", "E-PER", "O"}, {"S-LOC"}};
  ScoreReport perfect = entity_f1(gold, gold);
  CHECK(perfect.precision() == 1.0);
  CHECK(perfect.recall() == 1.0);
  CHECK(perfect.f1() == 1.0);
  CHECK(perfect.token_accuracy == 1.0);

  const Corpus all_o{{"O", "O", "O"}, {"O"}};
  ScoreReport zero = entity_f1(gold, all_o);
  CHECK(zero.precision() == 0.0);  // 0/0 -> 0
  CHECK(zero.recall() == 0.0);
  CHECK(zero.f1() == 0.0);
}

TEST_CASE("entity_f1 hand-derived half-credit fixture") {
  // gold spans {(PER,0,1),(LOC,3,3)}; predicted {(PER,0,1),(LOC,2,3)}
  const Corpus gold{{"B-PER", "E-PER", "O", "S-LOC"}};
  const Corpus pred{{"B-PER", "E-PER", "B-LOC", "E-LOC"}};
  ScoreReport r = entity_f1(gold, pred);
  CHECK(r.precision() == 0.5);
  CHECK(r.recall() == 0.5);
  CHECK(r.f1() == 0.5);
  CHECK(r.per_type.at("PER").f1() == 1.0);
  CHECK(r.per_type.at("LOC").f1() == 0.0);
}

TEST_CASE("entity_f1 swap symmetry and reorder invariance") {
  Rng rng(55);
  const std::vector<std::string> types{"PER", "LOC", "ORG"};
  auto random_tags = [&](std::size_t len) {
    Tags bio;
    while (bio.size() < len) {
      if (rng.bernoulli(0.5)) {
        bio.push_back("O");
      } else {
        const auto& ty = types[rng.index(types.size())];
        bio.push_back("B-" + ty);
        while (bio.size() < len && rng.bernoulli(0.4)) bio.push_back("I-" + ty);
      }
    }
    bio.resize(len);
    return bio_to_bioes(bio);
  };

  for (int trial = 0; trial < 20; ++trial) {
    Corpus gold, pred;
    for (int s = 0; s < 8; ++s) {
      const std::size_t len = 1 + rng.index(12);
      gold.push_back(random_tags(len));
      pred.push_back(random_tags(len));
    }
    const ScoreReport ab = entity_f1(gold, pred);
    const ScoreReport ba = entity_f1(pred, gold);
    CHECK(ab.precision() == doctest::Approx(ba.recall()).epsilon(1e-12));
    CHECK(ab.recall() == doctest::Approx(ba.precision()).epsilon(1e-12));
    CHECK(ab.f1() == doctest::Approx(ba.f1()).epsilon(1e-12));

    // reordering sentences must not move the score
    Corpus gold2 = gold, pred2 = pred;
    std::vector<std::size_t> perm(gold.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      gold2[i] = gold[perm[i]];
      pred2[i] = pred[perm[i]];
    }
    CHECK(entity_f1(gold2, pred2).f1() == doctest::Approx(ab.f1()).epsilon(1e-12));
  }
}

TEST_CASE("token accuracy") {
  CHECK(token_accuracy({{"A", "B"}}, {{"A", "B"}}) == 1.0);
  CHECK(token_accuracy({{"A", "B", "C", "D"}}, {{"A", "B", "C", "X"}}) == 0.75);
  CHECK(token_accuracy({{"A", "B"}}, {{"X", "Y"}}) == 0.0);
  CHECK_THROWS_AS(token_accuracy({{"A"}}, {{"A", "B"}}), Error);
}

TEST_CASE("alignment mismatch names the first diverging sentence") {
  const Corpus gold{{"O"}, {"O", "O"}};
  const Corpus pred{{"O"}, {"O"}};
  try {
    entity_f1(gold, pred);
    FAIL("expected contract error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::contract);
    CHECK(std::string(e.what()).find("sentence 1") != std::string::npos);
  }
}

TEST_CASE("interchange file reader") {
  const char* path = "seqtag_interchange.tmp";
  {
    std::ofstream out(path);
    out << "Nadia B-PER S-PER\nsails O O\n\nhome S-LOC O\n";
  }
  InterchangeFile f = read_interchange(path);
  std::remove(path);
  REQUIRE(f.tokens.size() == 2);
  CHECK(f.tokens[0][0] == "Nadia");
  CHECK(f.gold[0] == Tags{"B-PER", "O"});
  CHECK(f.pred[0] == Tags{"S-PER", "O"});
  CHECK(f.gold[1] == Tags{"S-LOC"});
  CHECK(f.pred[1] == Tags{"O"});
}
