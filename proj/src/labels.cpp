#include "seqtag/labels.hpp"

namespace seqtag {

ParsedTag parse_tag(const std::string& tag) {
  if (tag == "O") return {TagRole::O, ""};
  if (tag.size() >= 3 && tag[1] == '-') {
    switch (tag[0]) {
      case 'B': return {TagRole::B, tag.substr(2)};
      case 'I': return {TagRole::I, tag.substr(2)};
      case 'E': return {TagRole::E, tag.substr(2)};
      case 'S': return {TagRole::S, tag.substr(2)};
      default: break;
    }
  }
  raise(ErrorKind::scheme, "bad tag '" + tag + "'");
}

std::vector<std::string> bio_to_bioes(const std::vector<std::string>& tags) {
  const std::size_t n = tags.size();

  // repair pass: stray I-X starts an entity
  std::vector<ParsedTag> fixed(n);
  for (std::size_t i = 0; i < n; ++i) {
    ParsedTag t = parse_tag(tags[i]);
    if (t.role == TagRole::E || t.role == TagRole::S) {
      raise(ErrorKind::scheme, "bio_to_bioes: input tag '" + tags[i] + "' is not BIO");
    }
    if (t.role == TagRole::I) {
      const bool continues = i > 0 &&
                             (fixed[i - 1].role == TagRole::B || fixed[i - 1].role == TagRole::I) &&
                             fixed[i - 1].type == t.type;
      if (!continues) t.role = TagRole::B;
    }
    fixed[i] = std::move(t);
  }

  std::vector<std::string> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ParsedTag& t = fixed[i];
    if (t.role == TagRole::O) {
      out[i] = "O";
      continue;
    }
    const bool next_continues = i + 1 < n && fixed[i + 1].role == TagRole::I &&
                                fixed[i + 1].type == t.type;
    if (t.role == TagRole::B) {
      out[i] = (next_continues ? "B-" : "S-") + t.type;
    } else {  // I
      out[i] = (next_continues ? "I-" : "E-") + t.type;
    }
  }
  return out;
}

std::vector<std::string> bioes_to_bio(const std::vector<std::string>& tags) {
  std::vector<std::string> out;
  out.reserve(tags.size());
  for (const auto& tag : tags) {
    ParsedTag t = parse_tag(tag);
    switch (t.role) {
      case TagRole::S: out.push_back("B-" + t.type); break;
      case TagRole::E: out.push_back("I-" + t.type); break;
      default: out.push_back(tag); break;
    }
  }
  return out;
}

bool valid_bioes_sequence(std::span<const std::string> tags) {
  // open == true means an entity of `open_type` awaits its I/E continuation
  bool open = false;
  std::string open_type;
  for (const auto& tag : tags) {
    ParsedTag t = parse_tag(tag);
    switch (t.role) {
      case TagRole::O:
      case TagRole::S:
      case TagRole::B:
        if (open) return false;
        open = (t.role == TagRole::B);
        open_type = t.type;
        break;
      case TagRole::I:
      case TagRole::E:
        if (!open || open_type != t.type) return false;
        open = (t.role == TagRole::I);
        break;
    }
  }
  return !open;
}

int LabelSet::add(const std::string& name) {
  auto it = index.find(name);
  if (it != index.end()) return it->second;
  const int id = static_cast<int>(names.size());
  names.push_back(name);
  index.emplace(name, id);
  return id;
}

int LabelSet::require(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) raise(ErrorKind::scheme, "unknown label '" + name + "'");
  return it->second;
}

int LabelSet::find(const std::string& name) const {
  auto it = index.find(name);
  return it == index.end() ? -1 : it->second;
}

TransitionMask TransitionMask::none(std::size_t num_tags) {
  TransitionMask m;
  m.num_tags = num_tags;
  m.allowed.assign(num_tags * num_tags, 1);
  m.begin_ok.assign(num_tags, 1);
  m.end_ok.assign(num_tags, 1);
  return m;
}

TransitionMask bioes_mask(const LabelSet& labels) {
  const std::size_t n = labels.size();
  std::vector<ParsedTag> parsed;
  parsed.reserve(n);
  for (const auto& name : labels.names) parsed.push_back(parse_tag(name));

  TransitionMask m;
  m.num_tags = n;
  m.allowed.assign(n * n, 0);
  m.begin_ok.assign(n, 0);
  m.end_ok.assign(n, 0);

  auto starts_fresh = [](TagRole r) { return r == TagRole::O || r == TagRole::B || r == TagRole::S; };
  auto closes = [](TagRole r) { return r == TagRole::O || r == TagRole::E || r == TagRole::S; };

  for (std::size_t i = 0; i < n; ++i) {
    m.begin_ok[i] = starts_fresh(parsed[i].role) ? 1 : 0;
    m.end_ok[i] = closes(parsed[i].role) ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j) {
      const ParsedTag& a = parsed[i];
      const ParsedTag& b = parsed[j];
      bool ok;
      if (a.role == TagRole::B || a.role == TagRole::I) {
        // an open entity admits only its own continuation
        ok = (b.role == TagRole::I || b.role == TagRole::E) && b.type == a.type;
      } else {
        ok = starts_fresh(b.role);
      }
      m.allowed[i * n + j] = ok ? 1 : 0;
    }
  }
  return m;
}

}  // namespace seqtag
