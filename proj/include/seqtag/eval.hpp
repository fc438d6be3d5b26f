#pragma once

#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "seqtag/labels.hpp"

namespace seqtag {

struct EntitySpan {
  std::string type;
  std::size_t start = 0;  // inclusive token indices
  std::size_t end = 0;

  bool operator==(const EntitySpan&) const = default;
  bool operator<(const EntitySpan& o) const {
    return std::tie(start, end, type) < std::tie(o.start, o.end, o.type);
  }
};

// Maximal spans from a BIOES sequence, lenient about malformed input: a
// continuation with no matching open entity starts a new span; a span closes
// on E/S, on a tag of different type or role, or at sentence end.
std::vector<EntitySpan> extract_entities(std::span<const std::string> tags);

struct TypeCounts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  double precision() const { return predicted == 0 ? 0.0 : double(correct) / double(predicted); }
  double recall() const { return gold == 0 ? 0.0 : double(correct) / double(gold); }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct ScoreReport {
  TypeCounts overall;  // micro-averaged
  std::map<std::string, TypeCounts> per_type;
  double token_accuracy = 0.0;

  double precision() const { return overall.precision(); }
  double recall() const { return overall.recall(); }
  double f1() const { return overall.f1(); }
};

// Exact-match span scoring: a predicted span is correct iff type, start and
// end all match a gold span in the same sentence.
ScoreReport entity_f1(const std::vector<std::vector<std::string>>& gold,
                      const std::vector<std::vector<std::string>>& pred);

double token_accuracy(const std::vector<std::vector<std::string>>& gold,
                      const std::vector<std::vector<std::string>>& pred);

// Three-column interchange file: token, gold tag, predicted tag; blank line
// between sentences.
struct InterchangeFile {
  std::vector<std::vector<std::string>> tokens;
  std::vector<std::vector<std::string>> gold;
  std::vector<std::vector<std::string>> pred;
};

InterchangeFile read_interchange(const std::string& path);

}  // namespace seqtag
