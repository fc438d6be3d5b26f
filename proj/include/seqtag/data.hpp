#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqtag/labels.hpp"
#include "seqtag/rng.hpp"

namespace seqtag {

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;  // empty for unlabeled input
};

struct RawCorpus {
  std::vector<Sentence> sentences;
  std::string source;

  std::size_t token_count() const;
};

struct ParseOptions {
  int token_col = 0;
  int label_col = -1;  // -1: last column
  bool need_labels = true;
};

// CoNLL-style column text: fields split on ASCII whitespace runs, blank lines
// delimit sentences, lines whose first field is -DOCSTART- are skipped.
// LF and CRLF both accepted.
RawCorpus parse_conll(const std::string& path, const ParseOptions& opts = {});

// Decimal digits collapse to '0'; lowercasing (ASCII) only when asked.
// Idempotent.
std::string normalize_token(const std::string& token, bool lowercase);

// Converts every sentence's labels from BIO to BIOES.
RawCorpus corpus_bio_to_bioes(const RawCorpus& corpus);

struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::vector<std::string> forms;  // ["<pad>", "<unk>", ...] first-occurrence order
  std::unordered_map<std::string, int> index;

  Vocabulary();
  int add(const std::string& form);
  int lookup(const std::string& form) const;  // unk fallback, never fails
  int find(const std::string& form) const;    // -1 when absent
  std::size_t size() const { return forms.size(); }
};

struct Vocabs {
  Vocabulary words;  // over normalized training tokens
  Vocabulary chars;  // over raw surface codepoints
  LabelSet labels;
  bool lowercase = false;

  // normalized form -> lowercased form -> unk
  int lookup_word(const std::string& raw_token) const;
  std::vector<int> lookup_chars(const std::string& raw_token) const;
};

Vocabs build_vocabs(const RawCorpus& train, bool lowercase, int min_count = 1);

struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> data;  // rows × dim, row-major, vocab index order
  std::size_t covered = 0;
  std::size_t considered = 0;
  double coverage = 0.0;
};

// Text format: one entry per line, token then `dim` floats, space-separated.
// First occurrence of a token wins; vocab rows with no entry (directly or via
// their lowercased form) are drawn uniform(-sqrt(3/dim), +sqrt(3/dim)).
EmbeddingMatrix load_embeddings(const std::string& path, const Vocabs& vocabs, std::size_t dim,
                                Rng& rng);

struct EncodedSentence {
  std::vector<int> word_ids;
  std::vector<std::vector<int>> char_ids;
  std::vector<int> label_ids;  // -1 for labels outside the label set; empty when unlabeled

  std::size_t size() const { return word_ids.size(); }
};

EncodedSentence encode_sentence(const Sentence& sentence, const Vocabs& vocabs);

struct Batch {
  std::size_t size = 0;
  std::size_t max_len = 0;
  std::size_t max_word_len = 0;
  std::vector<int> word_ids;               // size × max_len, pad 0
  std::vector<int> char_ids;               // size × max_len × max_word_len, pad 0
  std::vector<int> label_ids;              // size × max_len (lengths are authoritative)
  std::vector<std::size_t> lengths;        // true sentence lengths
  std::vector<std::size_t> word_lengths;   // size × max_len, true word lengths
  std::vector<std::size_t> corpus_indices; // position of each row in the source corpus

  // Exact-length view of row b: padding stripped so downstream code (the CRF
  // in particular) never sees pad positions.
  EncodedSentence sentence(std::size_t b) const;
};

// Deterministic shuffle under the seed, then fixed-size batches padded to the
// batch maxima.
std::vector<Batch> make_batches(const RawCorpus& corpus, const Vocabs& vocabs,
                                std::size_t batch_size, std::uint64_t shuffle_seed);

// UTF-8 helpers; an invalid byte decodes to its own value (normalize_token
// additionally passes such bytes through untouched).
std::vector<std::uint32_t> utf8_codepoints(const std::string& s);
void append_utf8(std::string& out, std::uint32_t cp);

}  // namespace seqtag
