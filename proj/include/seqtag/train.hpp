#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seqtag/model.hpp"

namespace seqtag {

// Published defaults throughout; the config file and CLI flags override.
struct TrainConfig {
  std::string task = "ner";  // "ner" or "pos"

  double learning_rate = 0.015;
  double momentum = 0.9;
  double clip_norm = 5.0;
  std::size_t batch_size = 10;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  double dropout = 0.5;
  double lr_decay = 0.0;  // optional per-epoch decay, off by default
  std::uint64_t seed = 42;
  int min_count = 1;

  bool use_char_cnn = true;
  bool use_bilstm = true;
  bool use_crf = true;
  bool lowercase = false;
  bool freeze_embeddings = false;

  std::size_t char_dim = 30;
  std::size_t char_filters = 30;
  std::size_t char_kernel = 3;
  std::size_t word_dim = 100;
  std::size_t hidden = 100;

  void validate() const;

  // flat key=value text, same keys as the JSON form; '#' starts a comment
  static TrainConfig from_file(const std::string& path);
  static TrainConfig from_file(const std::string& path, const TrainConfig& base);
  void set_key(const std::string& key, const std::string& value);
};

ModelDims dims_of(const TrainConfig& config);
ModelFlags flags_of(const TrainConfig& config);

nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);

// Global L2 norm over every trainable gradient; rescales in place when the
// norm exceeds max_norm. Returns the applied scale. Non-finite gradients are
// a numeric error.
double clip_gradients(std::span<const std::pair<std::string, TensorPtr>> params, double max_norm);

// v <- momentum*v + g; theta <- theta - lr*v; grads zeroed afterwards.
class SgdMomentum {
 public:
  explicit SgdMomentum(std::span<const std::pair<std::string, TensorPtr>> params);
  void step(double lr, double momentum);

 private:
  std::vector<TensorPtr> params_;
  std::vector<std::vector<double>> velocity_;
};

struct Checkpoint {
  int version = 1;
  TrainConfig config;
  Vocabs vocabs;
  std::vector<std::pair<std::string, TensorPtr>> tensors;
  double best_dev_metric = 0.0;
  std::size_t epoch = 0;
};

// Layout: 8-byte magic "SEQTAG01", u64-LE JSON length, JSON metadata (config,
// vocabularies, ordered tensor manifest), then each tensor row-major as
// little-endian f64 in manifest order.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const Model& model, const TrainConfig& config, double best_metric,
                           std::size_t epoch);
Model model_from_checkpoint(const Checkpoint& ckpt);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
};

struct TrainCallbacks {
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  bool aborted = false;
  std::string abort_reason;
};

// One epoch = shuffle, batch, per-batch mean NLL, clip, step, then a dev
// pass. Keeps the best-dev checkpoint; stops after `patience` epochs without
// improvement or at max_epochs, whichever first. Gold labels must already
// match the model's label set (BIOES-converted for NER).
TrainResult train_loop(Model& model, const RawCorpus& train_corpus, const RawCorpus& dev_corpus,
                       const TrainConfig& config, const TrainCallbacks& callbacks = {});

}  // namespace seqtag
