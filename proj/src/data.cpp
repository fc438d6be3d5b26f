#include "seqtag/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace seqtag {

namespace {

// Unicode 15 Nd ranges in the BMP, each ten codepoints long.
constexpr std::uint32_t kDecimalDigitStarts[] = {
    0x0030, 0x0660, 0x06F0, 0x07C0, 0x0966, 0x09E6, 0x0A66, 0x0AE6, 0x0B66, 0x0BE6,
    0x0C66, 0x0CE6, 0x0D66, 0x0DE6, 0x0E50, 0x0ED0, 0x0F20, 0x1040, 0x1090, 0x17E0,
    0x1810, 0x1946, 0x19D0, 0x1A80, 0x1A90, 0x1B50, 0x1BB0, 0x1C40, 0x1C50, 0xA620,
    0xA8D0, 0xA900, 0xA9D0, 0xA9F0, 0xAA50, 0xABF0, 0xFF10,
};

bool is_decimal_digit(std::uint32_t cp) {
  for (std::uint32_t start : kDecimalDigitStarts) {
    if (cp >= start && cp < start + 10) return true;
    if (cp < start) break;  // table is sorted
  }
  return false;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace

std::size_t RawCorpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

namespace {

struct DecodedChar {
  std::uint32_t cp = 0;
  std::size_t len = 1;
  bool valid = false;
};

DecodedChar decode_utf8(const std::string& s, std::size_t i) {
  const auto bytes = reinterpret_cast<const unsigned char*>(s.data());
  const unsigned char b0 = bytes[i];
  std::size_t len;
  std::uint32_t cp;
  if (b0 < 0x80) {
    return {b0, 1, true};
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {b0, 1, false};  // stray continuation byte
  }
  if (i + len > s.size()) return {b0, 1, false};
  for (std::size_t j = 1; j < len; ++j) {
    if ((bytes[i + j] & 0xC0) != 0x80) return {b0, 1, false};
    cp = (cp << 6) | (bytes[i + j] & 0x3F);
  }
  return {cp, len, true};
}

}  // namespace

std::vector<std::uint32_t> utf8_codepoints(const std::string& s) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    const DecodedChar d = decode_utf8(s, i);
    out.push_back(d.cp);
    i += d.len;
  }
  return out;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

RawCorpus parse_conll(const std::string& path, const ParseOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::io, "cannot open '" + path + "'");

  RawCorpus corpus;
  corpus.source = path;
  Sentence current;
  std::string line;
  std::size_t line_no = 0;

  auto flush = [&]() {
    if (!current.tokens.empty()) {
      corpus.sentences.push_back(std::move(current));
      current = Sentence{};
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields = split_fields(line);
    if (fields.empty()) {
      flush();
      continue;
    }
    if (fields[0] == "-DOCSTART-") continue;

    if (opts.token_col < 0 || static_cast<std::size_t>(opts.token_col) >= fields.size()) {
      raise(ErrorKind::parse, path + ":" + std::to_string(line_no) + ": line has " +
                                  std::to_string(fields.size()) + " columns, token column " +
                                  std::to_string(opts.token_col) + " missing");
    }
    current.tokens.push_back(fields[static_cast<std::size_t>(opts.token_col)]);

    if (opts.need_labels) {
      int lc = opts.label_col;
      if (lc == -1) lc = static_cast<int>(fields.size()) - 1;
      const bool has_label = lc >= 0 && static_cast<std::size_t>(lc) < fields.size() &&
                             (opts.label_col != -1 || fields.size() >= 2);
      if (!has_label) {
        raise(ErrorKind::parse, path + ":" + std::to_string(line_no) + ": no label column");
      }
      current.labels.push_back(fields[static_cast<std::size_t>(lc)]);
    }
  }
  flush();
  return corpus;
}

std::string normalize_token(const std::string& token, bool lowercase) {
  std::string out;
  out.reserve(token.size());
  for (std::size_t i = 0; i < token.size();) {
    const DecodedChar d = decode_utf8(token, i);
    if (!d.valid) {
      out.push_back(token[i]);  // malformed bytes pass through untouched
      i += d.len;
      continue;
    }
    std::uint32_t cp = d.cp;
    if (is_decimal_digit(cp)) cp = '0';
    if (lowercase && cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
    append_utf8(out, cp);
    i += d.len;
  }
  return out;
}

RawCorpus corpus_bio_to_bioes(const RawCorpus& corpus) {
  RawCorpus out;
  out.source = corpus.source;
  out.sentences.reserve(corpus.sentences.size());
  for (const auto& s : corpus.sentences) {
    out.sentences.push_back({s.tokens, bio_to_bioes(s.labels)});
  }
  return out;
}

Vocabulary::Vocabulary() {
  forms = {"<pad>", "<unk>"};
  index = {{"<pad>", kPad}, {"<unk>", kUnk}};
}

int Vocabulary::add(const std::string& form) {
  auto it = index.find(form);
  if (it != index.end()) return it->second;
  const int id = static_cast<int>(forms.size());
  forms.push_back(form);
  index.emplace(form, id);
  return id;
}

int Vocabulary::lookup(const std::string& form) const {
  auto it = index.find(form);
  return it == index.end() ? kUnk : it->second;
}

int Vocabulary::find(const std::string& form) const {
  auto it = index.find(form);
  return it == index.end() ? -1 : it->second;
}

int Vocabs::lookup_word(const std::string& raw_token) const {
  const std::string norm = normalize_token(raw_token, lowercase);
  int id = words.find(norm);
  if (id >= 0) return id;
  id = words.find(ascii_lower(norm));
  if (id >= 0) return id;
  return Vocabulary::kUnk;
}

std::vector<int> Vocabs::lookup_chars(const std::string& raw_token) const {
  std::vector<int> out;
  for (std::uint32_t cp : utf8_codepoints(raw_token)) {
    std::string key;
    append_utf8(key, cp);
    out.push_back(chars.lookup(key));
  }
  return out;
}

Vocabs build_vocabs(const RawCorpus& train, bool lowercase, int min_count) {
  if (train.sentences.empty()) raise(ErrorKind::contract, "build_vocabs: empty corpus");

  Vocabs v;
  v.lowercase = lowercase;

  if (min_count <= 1) {
    for (const auto& s : train.sentences) {
      for (const auto& tok : s.tokens) v.words.add(normalize_token(tok, lowercase));
    }
  } else {
    std::unordered_map<std::string, int> counts;
    std::vector<std::string> order;  // first occurrence
    for (const auto& s : train.sentences) {
      for (const auto& tok : s.tokens) {
        std::string norm = normalize_token(tok, lowercase);
        if (counts[norm]++ == 0) order.push_back(std::move(norm));
      }
    }
    for (const auto& form : order) {
      if (counts[form] >= min_count) v.words.add(form);
    }
  }

  for (const auto& s : train.sentences) {
    for (const auto& tok : s.tokens) {
      for (std::uint32_t cp : utf8_codepoints(tok)) {
        std::string key;
        append_utf8(key, cp);
        v.chars.add(key);
      }
    }
  }

  for (const auto& s : train.sentences) {
    for (const auto& lab : s.labels) v.labels.add(lab);
  }
  return v;
}

EmbeddingMatrix load_embeddings(const std::string& path, const Vocabs& vocabs, std::size_t dim,
                                Rng& rng) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::io, "cannot open '" + path + "'");

  // collect only rows we can use: exact vocab forms plus their lowercasings
  std::unordered_set<std::string> wanted;
  for (std::size_t i = 2; i < vocabs.words.size(); ++i) {
    const std::string& form = vocabs.words.forms[i];
    wanted.insert(form);
    wanted.insert(ascii_lower(form));
  }

  std::unordered_map<std::string, std::vector<double>> found;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_fields(line);
    if (fields.size() != dim + 1) {
      raise(ErrorKind::format, path + ":" + std::to_string(line_no) + ": expected " +
                                   std::to_string(dim) + " values, got " +
                                   std::to_string(fields.size() - 1));
    }
    if (!wanted.count(fields[0]) || found.count(fields[0])) continue;  // first wins
    std::vector<double> values(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      char* endp = nullptr;
      values[j] = std::strtod(fields[j + 1].c_str(), &endp);
      if (endp == fields[j + 1].c_str() || *endp != '\0') {
        raise(ErrorKind::format,
              path + ":" + std::to_string(line_no) + ": bad float '" + fields[j + 1] + "'");
      }
    }
    found.emplace(fields[0], std::move(values));
  }

  EmbeddingMatrix m;
  m.rows = vocabs.words.size();
  m.dim = dim;
  m.data.assign(m.rows * dim, 0.0);
  m.considered = m.rows > 2 ? m.rows - 2 : 0;

  const double bound = std::sqrt(3.0 / static_cast<double>(dim));
  auto draw_row = [&](std::size_t r) {
    for (std::size_t j = 0; j < dim; ++j) m.data[r * dim + j] = rng.uniform(-bound, bound);
  };

  draw_row(Vocabulary::kUnk);  // pad row stays zero
  for (std::size_t i = 2; i < m.rows; ++i) {
    const std::string& form = vocabs.words.forms[i];
    auto it = found.find(form);
    if (it == found.end()) it = found.find(ascii_lower(form));
    if (it != found.end()) {
      std::copy(it->second.begin(), it->second.end(), m.data.begin() + i * dim);
      ++m.covered;
    } else {
      draw_row(i);
    }
  }
  m.coverage = m.considered == 0 ? 0.0
                                 : static_cast<double>(m.covered) / static_cast<double>(m.considered);
  return m;
}

EncodedSentence encode_sentence(const Sentence& sentence, const Vocabs& vocabs) {
  EncodedSentence enc;
  enc.word_ids.reserve(sentence.tokens.size());
  enc.char_ids.reserve(sentence.tokens.size());
  for (const auto& tok : sentence.tokens) {
    enc.word_ids.push_back(vocabs.lookup_word(tok));
    enc.char_ids.push_back(vocabs.lookup_chars(tok));
  }
  if (!sentence.labels.empty()) {
    enc.label_ids.reserve(sentence.labels.size());
    for (const auto& lab : sentence.labels) enc.label_ids.push_back(vocabs.labels.find(lab));
  }
  return enc;
}

EncodedSentence Batch::sentence(std::size_t b) const {
  EncodedSentence enc;
  const std::size_t n = lengths[b];
  enc.word_ids.reserve(n);
  enc.char_ids.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    enc.word_ids.push_back(word_ids[b * max_len + t]);
    const std::size_t wl = word_lengths[b * max_len + t];
    const int* base = char_ids.data() + (b * max_len + t) * max_word_len;
    enc.char_ids.emplace_back(base, base + wl);
  }
  if (!label_ids.empty()) {
    for (std::size_t t = 0; t < n; ++t) enc.label_ids.push_back(label_ids[b * max_len + t]);
  }
  return enc;
}

std::vector<Batch> make_batches(const RawCorpus& corpus, const Vocabs& vocabs,
                                std::size_t batch_size, std::uint64_t shuffle_seed) {
  if (batch_size == 0) raise(ErrorKind::contract, "make_batches: batch_size must be positive");

  std::vector<std::size_t> order(corpus.sentences.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(shuffle_seed);
  rng.shuffle(order);

  std::vector<EncodedSentence> encoded(corpus.sentences.size());
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    encoded[i] = encode_sentence(corpus.sentences[i], vocabs);
  }

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - start);
    Batch batch;
    batch.size = count;
    for (std::size_t r = 0; r < count; ++r) {
      const EncodedSentence& enc = encoded[order[start + r]];
      batch.max_len = std::max(batch.max_len, enc.size());
      for (const auto& cs : enc.char_ids) batch.max_word_len = std::max(batch.max_word_len, cs.size());
    }
    batch.word_ids.assign(count * batch.max_len, Vocabulary::kPad);
    batch.char_ids.assign(count * batch.max_len * batch.max_word_len, Vocabulary::kPad);
    batch.label_ids.assign(count * batch.max_len, 0);
    batch.word_lengths.assign(count * batch.max_len, 0);
    for (std::size_t r = 0; r < count; ++r) {
      const std::size_t src = order[start + r];
      const EncodedSentence& enc = encoded[src];
      batch.corpus_indices.push_back(src);
      batch.lengths.push_back(enc.size());
      for (std::size_t t = 0; t < enc.size(); ++t) {
        batch.word_ids[r * batch.max_len + t] = enc.word_ids[t];
        batch.word_lengths[r * batch.max_len + t] = enc.char_ids[t].size();
        for (std::size_t c = 0; c < enc.char_ids[t].size(); ++c) {
          batch.char_ids[(r * batch.max_len + t) * batch.max_word_len + c] = enc.char_ids[t][c];
        }
        if (!enc.label_ids.empty()) {
          batch.label_ids[r * batch.max_len + t] = enc.label_ids[t];
        }
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace seqtag
