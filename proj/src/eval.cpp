#include "seqtag/eval.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "seqtag/data.hpp"

namespace seqtag {

std::vector<EntitySpan> extract_entities(std::span<const std::string> tags) {
  std::vector<EntitySpan> spans;
  bool open = false;
  std::string type;
  std::size_t start = 0;

  auto close_at = [&](std::size_t end) {
    spans.push_back({type, start, end});
    open = false;
  };

  for (std::size_t i = 0; i < tags.size(); ++i) {
    const ParsedTag t = parse_tag(tags[i]);
    switch (t.role) {
      case TagRole::O:
        if (open) close_at(i - 1);
        break;
      case TagRole::B:
        if (open) close_at(i - 1);
        open = true;
        type = t.type;
        start = i;
        break;
      case TagRole::S:
        if (open) close_at(i - 1);
        spans.push_back({t.type, i, i});
        break;
      case TagRole::I:
        if (open && type == t.type) break;  // continues
        if (open) close_at(i - 1);
        open = true;  // lenient start
        type = t.type;
        start = i;
        break;
      case TagRole::E:
        if (open && type == t.type) {
          close_at(i);
        } else {
          if (open) close_at(i - 1);
          spans.push_back({t.type, i, i});  // lenient single-token span
        }
        break;
    }
  }
  if (open) close_at(tags.size() - 1);
  return spans;
}

namespace {

void check_aligned(const std::vector<std::vector<std::string>>& gold,
                   const std::vector<std::vector<std::string>>& pred) {
  if (gold.size() != pred.size()) {
    raise(ErrorKind::contract, "gold has " + std::to_string(gold.size()) + " sentences, pred " +
                                   std::to_string(pred.size()));
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) {
      raise(ErrorKind::contract, "sentence " + std::to_string(i) + " has " +
                                     std::to_string(gold[i].size()) + " gold tags but " +
                                     std::to_string(pred[i].size()) + " predictions");
    }
  }
}

}  // namespace

ScoreReport entity_f1(const std::vector<std::vector<std::string>>& gold,
                      const std::vector<std::vector<std::string>>& pred) {
  check_aligned(gold, pred);

  ScoreReport report;
  std::size_t tokens = 0, matches = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::vector<EntitySpan> gs = extract_entities(gold[i]);
    std::vector<EntitySpan> ps = extract_entities(pred[i]);
    std::set<EntitySpan> gset(gs.begin(), gs.end());

    for (const auto& s : gs) {
      report.overall.gold++;
      report.per_type[s.type].gold++;
    }
    for (const auto& s : ps) {
      report.overall.predicted++;
      report.per_type[s.type].predicted++;
      if (gset.count(s)) {
        report.overall.correct++;
        report.per_type[s.type].correct++;
      }
    }
    tokens += gold[i].size();
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      if (gold[i][t] == pred[i][t]) ++matches;
    }
  }
  report.token_accuracy = tokens == 0 ? 0.0 : static_cast<double>(matches) / tokens;
  return report;
}

double token_accuracy(const std::vector<std::vector<std::string>>& gold,
                      const std::vector<std::vector<std::string>>& pred) {
  check_aligned(gold, pred);
  std::size_t tokens = 0, matches = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    tokens += gold[i].size();
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      if (gold[i][t] == pred[i][t]) ++matches;
    }
  }
  return tokens == 0 ? 0.0 : static_cast<double>(matches) / tokens;
}

InterchangeFile read_interchange(const std::string& path) {
  ParseOptions opts;
  opts.token_col = 0;
  opts.label_col = 1;
  RawCorpus gold = parse_conll(path, opts);
  opts.label_col = 2;
  RawCorpus pred = parse_conll(path, opts);

  InterchangeFile f;
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    f.tokens.push_back(gold.sentences[i].tokens);
    f.gold.push_back(gold.sentences[i].labels);
    f.pred.push_back(pred.sentences[i].labels);
  }
  return f;
}

}  // namespace seqtag
