#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqtag/error.hpp"

namespace seqtag {

enum class TagRole : char { O = 'O', B = 'B', I = 'I', E = 'E', S = 'S' };

struct ParsedTag {
  TagRole role;
  std::string type;  // empty for O
};

// Splits "B-PER" style tags; scheme error on anything that is not "O" or
// "<role>-<type>" with role in B/I/E/S.
ParsedTag parse_tag(const std::string& tag);

// BIO -> BIOES. Single-token entities become S-X, runs end in E-X. A stray
// I-X with no live same-type entity to continue is repaired to B-X first.
// E/S tags in the input are a scheme error (input must be BIO).
std::vector<std::string> bio_to_bioes(const std::vector<std::string>& tags);

// Inverse mapping: S-X -> B-X, E-X -> I-X, everything else unchanged.
std::vector<std::string> bioes_to_bio(const std::vector<std::string>& tags);

// Structural validity of a BIOES sequence: starts typeless or at an entity
// start, every continuation matches its open entity, ends closed.
bool valid_bioes_sequence(std::span<const std::string> tags);

// Closed tag vocabulary; index order is first occurrence.
struct LabelSet {
  std::vector<std::string> names;
  std::unordered_map<std::string, int> index;

  int add(const std::string& name);
  int require(const std::string& name) const;  // scheme error when unknown
  int find(const std::string& name) const;     // -1 when unknown
  std::size_t size() const { return names.size(); }
};

// Hard transition constraints for constrained decoding. allowed is
// row-major [from][to].
struct TransitionMask {
  std::size_t num_tags = 0;
  std::vector<std::uint8_t> allowed;
  std::vector<std::uint8_t> begin_ok;
  std::vector<std::uint8_t> end_ok;

  static TransitionMask none(std::size_t num_tags);  // everything permitted
};

// Mask that admits exactly the structurally valid BIOES sequences over the
// given label set.
TransitionMask bioes_mask(const LabelSet& labels);

}  // namespace seqtag
