#include "seqtag/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <cstring>
#include <sstream>

#include "seqtag/eval.hpp"
#include "seqtag/kernels.hpp"

namespace seqtag {

void TrainConfig::validate() const {
  if (task != "ner" && task != "pos") raise(ErrorKind::contract, "task must be ner or pos");
  if (learning_rate <= 0.0) raise(ErrorKind::contract, "learning_rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) raise(ErrorKind::contract, "momentum must be in [0,1)");
  if (clip_norm <= 0.0) raise(ErrorKind::contract, "clip_norm must be positive");
  if (batch_size == 0) raise(ErrorKind::contract, "batch_size must be positive");
  if (max_epochs == 0) raise(ErrorKind::contract, "max_epochs must be positive");
  if (patience == 0 || patience > max_epochs) {
    raise(ErrorKind::contract, "patience must be in [1, max_epochs]");
  }
  if (dropout < 0.0 || dropout >= 1.0) raise(ErrorKind::contract, "dropout must be in [0,1)");
  if (lr_decay < 0.0) raise(ErrorKind::contract, "lr_decay must be non-negative");
  if (min_count < 1) raise(ErrorKind::contract, "min_count must be at least 1");
}

namespace {

template <class T>
T parse_unsigned(const std::string& value, const std::string& key) {
  try {
    return static_cast<T>(std::stoull(value));
  } catch (const std::exception&) {
    raise(ErrorKind::format, "config key '" + key + "': bad value '" + value + "'");
  }
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  raise(ErrorKind::format, "config key '" + key + "': bad boolean '" + value + "'");
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    return std::stod(value);
  } catch (const std::exception&) {
    raise(ErrorKind::format, "config key '" + key + "': bad value '" + value + "'");
  }
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

void TrainConfig::set_key(const std::string& key, const std::string& value) {
  if (key == "task") {
    task = value;
  } else if (key == "learning_rate") {
    learning_rate = parse_double(value, key);
  } else if (key == "momentum") {
    momentum = parse_double(value, key);
  } else if (key == "clip_norm") {
    clip_norm = parse_double(value, key);
  } else if (key == "batch_size") {
    batch_size = parse_unsigned<std::size_t>(value, key);
  } else if (key == "max_epochs") {
    max_epochs = parse_unsigned<std::size_t>(value, key);
  } else if (key == "patience") {
    patience = parse_unsigned<std::size_t>(value, key);
  } else if (key == "dropout") {
    dropout = parse_double(value, key);
  } else if (key == "lr_decay") {
    lr_decay = parse_double(value, key);
  } else if (key == "seed") {
    seed = parse_unsigned<std::uint64_t>(value, key);
  } else if (key == "min_count") {
    min_count = static_cast<int>(parse_unsigned<unsigned>(value, key));
  } else if (key == "use_char_cnn") {
    use_char_cnn = parse_bool(value, key);
  } else if (key == "use_bilstm") {
    use_bilstm = parse_bool(value, key);
  } else if (key == "use_crf") {
    use_crf = parse_bool(value, key);
  } else if (key == "lowercase") {
    lowercase = parse_bool(value, key);
  } else if (key == "freeze_embeddings") {
    freeze_embeddings = parse_bool(value, key);
  } else if (key == "char_dim") {
    char_dim = parse_unsigned<std::size_t>(value, key);
  } else if (key == "char_filters") {
    char_filters = parse_unsigned<std::size_t>(value, key);
  } else if (key == "char_kernel") {
    char_kernel = parse_unsigned<std::size_t>(value, key);
  } else if (key == "word_dim") {
    word_dim = parse_unsigned<std::size_t>(value, key);
  } else if (key == "hidden") {
    hidden = parse_unsigned<std::size_t>(value, key);
  } else {
    raise(ErrorKind::format, "unknown config key '" + key + "'");
  }
}

TrainConfig TrainConfig::from_file(const std::string& path) { return from_file(path, TrainConfig{}); }

TrainConfig TrainConfig::from_file(const std::string& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::io, "cannot open config '" + path + "'");
  TrainConfig cfg = base;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      raise(ErrorKind::format, path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    cfg.set_key(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return cfg;
}

ModelDims dims_of(const TrainConfig& c) {
  return {c.char_dim, c.char_filters, c.char_kernel, c.word_dim, c.hidden};
}

ModelFlags flags_of(const TrainConfig& c) {
  return {c.use_char_cnn, c.use_bilstm, c.use_crf, c.freeze_embeddings, c.dropout};
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return nlohmann::json{{"task", c.task},
                        {"learning_rate", c.learning_rate},
                        {"momentum", c.momentum},
                        {"clip_norm", c.clip_norm},
                        {"batch_size", c.batch_size},
                        {"max_epochs", c.max_epochs},
                        {"patience", c.patience},
                        {"dropout", c.dropout},
                        {"lr_decay", c.lr_decay},
                        {"seed", c.seed},
                        {"min_count", c.min_count},
                        {"use_char_cnn", c.use_char_cnn},
                        {"use_bilstm", c.use_bilstm},
                        {"use_crf", c.use_crf},
                        {"lowercase", c.lowercase},
                        {"freeze_embeddings", c.freeze_embeddings},
                        {"char_dim", c.char_dim},
                        {"char_filters", c.char_filters},
                        {"char_kernel", c.char_kernel},
                        {"word_dim", c.word_dim},
                        {"hidden", c.hidden}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  j.at("task").get_to(c.task);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("momentum").get_to(c.momentum);
  j.at("clip_norm").get_to(c.clip_norm);
  j.at("batch_size").get_to(c.batch_size);
  j.at("max_epochs").get_to(c.max_epochs);
  j.at("patience").get_to(c.patience);
  j.at("dropout").get_to(c.dropout);
  j.at("lr_decay").get_to(c.lr_decay);
  j.at("seed").get_to(c.seed);
  j.at("min_count").get_to(c.min_count);
  j.at("use_char_cnn").get_to(c.use_char_cnn);
  j.at("use_bilstm").get_to(c.use_bilstm);
  j.at("use_crf").get_to(c.use_crf);
  j.at("lowercase").get_to(c.lowercase);
  j.at("freeze_embeddings").get_to(c.freeze_embeddings);
  j.at("char_dim").get_to(c.char_dim);
  j.at("char_filters").get_to(c.char_filters);
  j.at("char_kernel").get_to(c.char_kernel);
  j.at("word_dim").get_to(c.word_dim);
  j.at("hidden").get_to(c.hidden);
  return c;
}

double clip_gradients(std::span<const std::pair<std::string, TensorPtr>> params, double max_norm) {
  const auto& K = kernels::active();
  double sumsq = 0.0;
  for (const auto& [name, p] : params) {
    if (!p->requires_grad()) continue;
    const auto g = p->grad();
    const double s = K.dot(g.data(), g.data(), g.size());
    if (!std::isfinite(s)) raise(ErrorKind::numeric, "non-finite gradient in '" + name + "'");
    sumsq += s;
  }
  const double norm = std::sqrt(sumsq);
  if (!std::isfinite(norm)) raise(ErrorKind::numeric, "non-finite gradient norm");
  if (norm <= max_norm) return 1.0;
  const double factor = max_norm / norm;
  for (const auto& [name, p] : params) {
    (void)name;
    if (!p->requires_grad()) continue;
    auto g = p->grad();
    K.scale(g.data(), factor, g.size());
  }
  return factor;
}

SgdMomentum::SgdMomentum(std::span<const std::pair<std::string, TensorPtr>> params) {
  for (const auto& [name, p] : params) {
    (void)name;
    if (!p->requires_grad()) continue;
    params_.push_back(p);
    velocity_.emplace_back(p->numel(), 0.0);
  }
}

void SgdMomentum::step(double lr, double momentum) {
  const auto& K = kernels::active();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    TensorPtr& p = params_[i];
    std::vector<double>& v = velocity_[i];
    const auto g = p->grad();
    K.scale(v.data(), momentum, v.size());
    K.axpy(v.data(), 1.0, g.data(), v.size());
    K.axpy(p->data().data(), -lr, v.data(), v.size());
    p->zero_grad();
  }
}

// --- checkpoint io -----------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'E', 'Q', 'T', 'A', 'G', '0', '1'};

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f64_le(std::string& out, double d) { put_u64_le(out, std::bit_cast<std::uint64_t>(d)); }

double get_f64_le(const unsigned char* p) { return std::bit_cast<double>(get_u64_le(p)); }

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json meta;
  meta["version"] = ckpt.version;
  meta["config"] = config_to_json(ckpt.config);
  meta["vocab"] = {{"words", ckpt.vocabs.words.forms},
                   {"chars", ckpt.vocabs.chars.forms},
                   {"labels", ckpt.vocabs.labels.names},
                   {"lowercase", ckpt.vocabs.lowercase}};
  meta["best_dev_metric"] = ckpt.best_dev_metric;
  meta["epoch"] = ckpt.epoch;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& [name, t] : ckpt.tensors) {
    manifest.push_back({{"name", name}, {"shape", t->shape()}});
  }
  meta["tensors"] = manifest;

  std::string blob;
  blob.append(kMagic, sizeof(kMagic));
  const std::string meta_str = meta.dump();
  put_u64_le(blob, meta_str.size());
  blob += meta_str;
  for (const auto& [name, t] : ckpt.tensors) {
    (void)name;
    for (double v : t->data()) put_f64_le(blob, v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::io, "cannot write '" + path + "'");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) raise(ErrorKind::io, "short write to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::io, "cannot open '" + path + "'");
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());

  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    raise(ErrorKind::checkpoint, path + ": bad magic");
  }
  const std::uint64_t meta_len = get_u64_le(bytes + 8);
  if (16 + meta_len > blob.size()) raise(ErrorKind::checkpoint, path + ": truncated metadata");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(blob.substr(16, meta_len));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::checkpoint, path + ": metadata is not valid JSON (" + e.what() + ")");
  }

  Checkpoint ckpt;
  try {
    meta.at("version").get_to(ckpt.version);
    if (ckpt.version != 1) {
      raise(ErrorKind::checkpoint, path + ": unsupported version " + std::to_string(ckpt.version));
    }
    ckpt.config = config_from_json(meta.at("config"));
    const auto& vocab = meta.at("vocab");
    std::vector<std::string> words = vocab.at("words").get<std::vector<std::string>>();
    std::vector<std::string> chars = vocab.at("chars").get<std::vector<std::string>>();
    std::vector<std::string> labels = vocab.at("labels").get<std::vector<std::string>>();
    if (words.size() < 2 || words[0] != "<pad>" || words[1] != "<unk>") {
      raise(ErrorKind::checkpoint, path + ": malformed word vocabulary");
    }
    for (std::size_t i = 2; i < words.size(); ++i) ckpt.vocabs.words.add(words[i]);
    for (std::size_t i = 2; i < chars.size(); ++i) ckpt.vocabs.chars.add(chars[i]);
    for (const auto& l : labels) ckpt.vocabs.labels.add(l);
    vocab.at("lowercase").get_to(ckpt.vocabs.lowercase);
    meta.at("best_dev_metric").get_to(ckpt.best_dev_metric);
    meta.at("epoch").get_to(ckpt.epoch);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::checkpoint, path + ": metadata field missing or mistyped (" + e.what() + ")");
  }

  std::size_t offset = 16 + meta_len;
  for (const auto& entry : meta.at("tensors")) {
    std::string name;
    std::vector<std::size_t> shape;
    try {
      entry.at("name").get_to(name);
      entry.at("shape").get_to(shape);
    } catch (const nlohmann::json::exception&) {
      raise(ErrorKind::checkpoint, path + ": malformed tensor manifest entry");
    }
    std::size_t numel = 1;
    for (std::size_t d : shape) numel *= d;
    if (offset + numel * 8 > blob.size()) {
      raise(ErrorKind::checkpoint, path + ": payload for tensor '" + name + "' is truncated");
    }
    std::vector<double> data(numel);
    for (std::size_t i = 0; i < numel; ++i) data[i] = get_f64_le(bytes + offset + i * 8);
    offset += numel * 8;
    ckpt.tensors.emplace_back(name, Tensor::from_data(std::move(shape), std::move(data)));
  }
  if (offset != blob.size()) {
    raise(ErrorKind::checkpoint, path + ": trailing bytes after last tensor");
  }
  return ckpt;
}

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config, double best_metric,
                           std::size_t epoch) {
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.vocabs = model.vocabs();
  ckpt.best_dev_metric = best_metric;
  ckpt.epoch = epoch;
  for (const auto& [name, t] : model.named_params()) {
    ckpt.tensors.emplace_back(name, t->clone());
  }
  return ckpt;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model model(dims_of(ckpt.config), flags_of(ckpt.config), ckpt.vocabs, ckpt.config.seed);
  auto params = model.named_params();
  if (params.size() != ckpt.tensors.size()) {
    raise(ErrorKind::checkpoint, "checkpoint has " + std::to_string(ckpt.tensors.size()) +
                                     " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [saved_name, saved] = ckpt.tensors[i];
    auto& [name, dst] = params[i];
    if (saved_name != name) {
      raise(ErrorKind::checkpoint, "tensor '" + saved_name + "' where '" + name + "' expected");
    }
    if (saved->shape() != dst->shape()) {
      raise(ErrorKind::checkpoint, "tensor '" + name + "' has shape " + saved->shape_str() +
                                       ", model expects " + dst->shape_str());
    }
    std::copy(saved->data().begin(), saved->data().end(), dst->data().begin());
  }
  return model;
}

// --- training loop -----------------------------------------------------

namespace {

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch));
}

}  // namespace

TrainResult train_loop(Model& model, const RawCorpus& train_corpus, const RawCorpus& dev_corpus,
                       const TrainConfig& config, const TrainCallbacks& callbacks) {
  config.validate();
  if (train_corpus.sentences.empty()) raise(ErrorKind::contract, "empty training corpus");

  auto params = model.named_params();
  SgdMomentum optimizer(params);

  std::vector<EncodedSentence> dev_encoded;
  std::vector<std::vector<std::string>> dev_gold;
  dev_encoded.reserve(dev_corpus.sentences.size());
  for (const auto& s : dev_corpus.sentences) {
    dev_encoded.push_back(encode_sentence(s, model.vocabs()));
    dev_gold.push_back(s.labels);
  }

  TrainResult result;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = config.learning_rate / (1.0 + config.lr_decay * static_cast<double>(epoch - 1));
    auto batches = make_batches(train_corpus, model.vocabs(), config.batch_size,
                                epoch_seed(config.seed, epoch));

    double loss_sum = 0.0;
    std::size_t trained_sentences = 0;
    std::size_t skipped_batches = 0;

    for (const Batch& batch : batches) {
      Graph g;
      TensorPtr total;
      for (std::size_t b = 0; b < batch.size; ++b) {
        TensorPtr loss = model.sentence_loss(g, batch.sentence(b), /*train=*/true);
        total = b == 0 ? loss : add(g, total, loss);
      }
      TensorPtr mean = scale(g, total, 1.0 / static_cast<double>(batch.size));
      if (!std::isfinite(mean->value())) {
        // parameters are untouched so far; drop the batch and move on
        ++skipped_batches;
        std::cerr << "seqtag: epoch " << epoch << ": non-finite batch loss, batch skipped\n";
        continue;
      }
      g.backward(mean);
      try {
        clip_gradients(params, config.clip_norm);
      } catch (const Error&) {
        for (const auto& [name, p] : params) {
          (void)name;
          if (p->requires_grad()) p->zero_grad();
        }
        ++skipped_batches;
        std::cerr << "seqtag: epoch " << epoch << ": non-finite gradients, batch skipped\n";
        continue;
      }
      optimizer.step(lr, config.momentum);
      loss_sum += mean->value() * static_cast<double>(batch.size);
      trained_sentences += batch.size;
    }

    if (trained_sentences == 0) {
      result.aborted = true;
      result.abort_reason = "every batch of epoch " + std::to_string(epoch) + " failed numerically";
      break;
    }
    if (skipped_batches > 0) {
      std::cerr << "seqtag: epoch " << epoch << ": " << skipped_batches << " batch(es) skipped\n";
    }

    std::vector<std::vector<std::string>> dev_pred;
    dev_pred.reserve(dev_encoded.size());
    for (const auto& enc : dev_encoded) dev_pred.push_back(model.predict_labels(enc));
    const double metric = config.task == "pos" ? token_accuracy(dev_gold, dev_pred)
                                               : entity_f1(dev_gold, dev_pred).f1();

    EpochRecord record{epoch, loss_sum / static_cast<double>(trained_sentences), metric};
    result.history.push_back(record);
    if (callbacks.on_epoch) callbacks.on_epoch(record);

    if (metric > best_metric) {
      best_metric = metric;
      epochs_since_improvement = 0;
      result.best = make_checkpoint(model, config, best_metric, epoch);
    } else {
      ++epochs_since_improvement;
      if (epochs_since_improvement >= config.patience) break;
    }
  }
  return result;
}

}  // namespace seqtag
