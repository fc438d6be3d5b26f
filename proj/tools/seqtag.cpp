#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "seqtag/eval.hpp"
#include "seqtag/train.hpp"

namespace fs = std::filesystem;
using namespace seqtag;

namespace {

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::io, "cannot open '" + path + "'");
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool corpus_is_bioes(const RawCorpus& corpus) {
  for (const auto& s : corpus.sentences) {
    for (const auto& lab : s.labels) {
      if (lab.size() >= 2 && (lab[0] == 'E' || lab[0] == 'S') && lab[1] == '-') return true;
    }
  }
  return false;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

void print_ner_report(const ScoreReport& r) {
  std::printf("overall precision %s recall %s f1 %s (gold %zu predicted %zu correct %zu)\n",
              pct(r.precision()).c_str(), pct(r.recall()).c_str(), pct(r.f1()).c_str(),
              r.overall.gold, r.overall.predicted, r.overall.correct);
  for (const auto& [type, counts] : r.per_type) {
    std::printf("%s precision %s recall %s f1 %s (gold %zu predicted %zu correct %zu)\n",
                type.c_str(), pct(counts.precision()).c_str(), pct(counts.recall()).c_str(),
                pct(counts.f1()).c_str(), counts.gold, counts.predicted, counts.correct);
  }
  std::printf("token accuracy %s\n", pct(r.token_accuracy).c_str());
}

struct TrainArgs {
  std::string train_path, dev_path, test_path, embeddings_path, config_path, out_dir;
  std::string task = "ner";
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool no_char_cnn = false, no_bilstm = false, no_crf = false, lowercase = false;
  bool freeze_embeddings = false;
};

double evaluate_corpus(Model& model, const RawCorpus& corpus, const std::string& task,
                       ScoreReport* report_out) {
  std::vector<std::vector<std::string>> gold, pred;
  for (const auto& s : corpus.sentences) {
    gold.push_back(s.labels);
    pred.push_back(model.predict_labels(encode_sentence(s, model.vocabs())));
  }
  if (task == "pos") {
    const double acc = token_accuracy(gold, pred);
    if (report_out) report_out->token_accuracy = acc;
    return acc;
  }
  ScoreReport r = entity_f1(gold, pred);
  if (report_out) *report_out = r;
  return r.f1();
}

int cmd_train(const TrainArgs& args) {
  TrainConfig config;
  if (const char* env = std::getenv("SEQTAG_SEED")) {
    config.seed = std::strtoull(env, nullptr, 10);
  }
  if (!args.config_path.empty()) config = TrainConfig::from_file(args.config_path, config);
  if (args.seed_given) config.seed = args.seed;
  if (args.task != "ner") config.task = args.task;
  if (args.no_char_cnn) config.use_char_cnn = false;
  if (args.no_bilstm) config.use_bilstm = false;
  if (args.no_crf) config.use_crf = false;
  if (args.lowercase) config.lowercase = true;
  if (args.freeze_embeddings) config.freeze_embeddings = true;
  config.validate();

  RawCorpus train_corpus = parse_conll(args.train_path);
  RawCorpus dev_corpus = parse_conll(args.dev_path);
  RawCorpus test_corpus;
  if (!args.test_path.empty()) test_corpus = parse_conll(args.test_path);

  if (config.task == "ner") {
    // CoNLL-style BIO (including IOB1 files, via the stray-I repair) is
    // converted; input that already carries E-/S- tags is taken as BIOES.
    if (!corpus_is_bioes(train_corpus)) train_corpus = corpus_bio_to_bioes(train_corpus);
    if (!corpus_is_bioes(dev_corpus)) dev_corpus = corpus_bio_to_bioes(dev_corpus);
    if (!test_corpus.sentences.empty() && !corpus_is_bioes(test_corpus)) {
      test_corpus = corpus_bio_to_bioes(test_corpus);
    }
  }

  Vocabs vocabs = build_vocabs(train_corpus, config.lowercase, config.min_count);
  Model model(dims_of(config), flags_of(config), vocabs, config.seed);

  double embedding_coverage = -1.0;
  if (!args.embeddings_path.empty()) {
    Rng emb_rng(config.seed ^ 0xA5A5A5A5A5A5A5A5ULL);
    EmbeddingMatrix m = load_embeddings(args.embeddings_path, vocabs, config.word_dim, emb_rng);
    model.install_word_embeddings(m);
    embedding_coverage = m.coverage;
    std::printf("embeddings: %zu/%zu vocabulary rows covered (%.1f%%)\n", m.covered, m.considered,
                100.0 * m.coverage);
  }

  fs::create_directories(args.out_dir);
  const std::string manifest_path = (fs::path(args.out_dir) / "manifest.json").string();
  const std::string ckpt_path = (fs::path(args.out_dir) / "model.ckpt").string();
  const std::string history_path = (fs::path(args.out_dir) / "history.jsonl").string();

  // manifest goes out before training starts: it pins the run
  {
    nlohmann::json manifest;
    manifest["command"] = "train";
    manifest["config"] = config_to_json(config);
    manifest["seed"] = config.seed;
    nlohmann::json inputs, hashes;
    inputs["train"] = args.train_path;
    hashes["train"] = hex64(fnv1a_file(args.train_path));
    inputs["dev"] = args.dev_path;
    hashes["dev"] = hex64(fnv1a_file(args.dev_path));
    if (!args.test_path.empty()) {
      inputs["test"] = args.test_path;
      hashes["test"] = hex64(fnv1a_file(args.test_path));
    }
    if (!args.embeddings_path.empty()) {
      inputs["embeddings"] = args.embeddings_path;
      hashes["embeddings"] = hex64(fnv1a_file(args.embeddings_path));
    }
    if (embedding_coverage >= 0.0) manifest["embedding_coverage"] = embedding_coverage;
    manifest["inputs"] = inputs;
    manifest["input_hashes"] = hashes;
    manifest["outputs"] = {{"checkpoint", ckpt_path}, {"history", history_path}};
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) raise(ErrorKind::io, "cannot write '" + manifest_path + "'");
    out << manifest.dump(2) << "\n";
  }

  std::ofstream history(history_path, std::ios::trunc);
  if (!history) raise(ErrorKind::io, "cannot write '" + history_path + "'");
  TrainCallbacks callbacks;
  callbacks.on_epoch = [&](const EpochRecord& r) {
    nlohmann::json line{{"epoch", r.epoch}, {"train_loss", r.train_loss},
                        {"dev_metric", r.dev_metric}};
    history << line.dump() << "\n";
    history.flush();
    std::printf("epoch %zu train_loss %.6f dev_%s %s\n", r.epoch, r.train_loss,
                config.task == "pos" ? "acc" : "f1", pct(r.dev_metric).c_str());
  };

  TrainResult result = train_loop(model, train_corpus, dev_corpus, config, callbacks);
  if (result.history.empty()) {
    std::fprintf(stderr, "error: training produced no epochs (%s)\n", result.abort_reason.c_str());
    return 1;
  }
  save_checkpoint(ckpt_path, result.best);
  if (result.aborted) {
    std::fprintf(stderr, "warning: training aborted early: %s (best checkpoint retained)\n",
                 result.abort_reason.c_str());
  }

  std::printf("best epoch %zu dev_%s %s\n", result.best.epoch,
              config.task == "pos" ? "acc" : "f1", pct(result.best.best_dev_metric).c_str());

  if (!test_corpus.sentences.empty()) {
    Model best = model_from_checkpoint(result.best);
    const double metric = evaluate_corpus(best, test_corpus, config.task, nullptr);
    std::printf("test_%s %s\n", config.task == "pos" ? "acc" : "f1", pct(metric).c_str());
  }
  return 0;
}

int cmd_tag(const std::string& model_path, const std::string& input_path,
            const std::string& output_path, const std::string& scheme) {
  Checkpoint ckpt = load_checkpoint(model_path);
  Model model = model_from_checkpoint(ckpt);

  ParseOptions opts;
  opts.need_labels = false;
  RawCorpus input = parse_conll(input_path, opts);

  std::ofstream out(output_path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::io, "cannot write '" + output_path + "'");
  for (const auto& sentence : input.sentences) {
    std::vector<std::string> tags =
        model.predict_labels(encode_sentence(sentence, model.vocabs()));
    if (scheme == "bio") tags = bioes_to_bio(tags);
    for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
      out << sentence.tokens[t] << ' ' << tags[t] << '\n';
    }
    out << '\n';
  }
  return 0;
}

int cmd_eval(const std::string& gold_path, const std::string& pred_path, const std::string& task) {
  std::vector<std::vector<std::string>> gold, pred;
  std::size_t tokens = 0;
  if (gold_path == pred_path) {
    // one three-column interchange file: token, gold, predicted
    InterchangeFile f = read_interchange(gold_path);
    gold = f.gold;
    pred = f.pred;
    for (const auto& s : f.tokens) tokens += s.size();
  } else {
    RawCorpus g = parse_conll(gold_path);
    RawCorpus p = parse_conll(pred_path);
    if (g.sentences.size() != p.sentences.size()) {
      raise(ErrorKind::contract, "gold has " + std::to_string(g.sentences.size()) +
                                     " sentences, pred has " + std::to_string(p.sentences.size()));
    }
    for (std::size_t i = 0; i < g.sentences.size(); ++i) {
      if (g.sentences[i].tokens.size() != p.sentences[i].tokens.size()) {
        raise(ErrorKind::contract,
              "sentence " + std::to_string(i) + " has " +
                  std::to_string(g.sentences[i].tokens.size()) + " gold tokens but " +
                  std::to_string(p.sentences[i].tokens.size()) + " predicted");
      }
      gold.push_back(g.sentences[i].labels);
      pred.push_back(p.sentences[i].labels);
      tokens += g.sentences[i].tokens.size();
    }
  }

  std::printf("processed %zu sentences, %zu tokens\n", gold.size(), tokens);
  if (task == "pos") {
    std::printf("token accuracy %s\n", pct(token_accuracy(gold, pred)).c_str());
  } else {
    print_ner_report(entity_f1(gold, pred));
  }
  return 0;
}

int cmd_convert(const std::string& input_path, const std::string& output_path,
                const std::string& from, const std::string& to) {
  if (!((from == "bio" && to == "bioes") || (from == "bioes" && to == "bio"))) {
    raise(ErrorKind::contract, "convert supports bio->bioes and bioes->bio only");
  }

  std::ifstream in(input_path, std::ios::binary);
  if (!in) raise(ErrorKind::io, "cannot open '" + input_path + "'");
  std::vector<std::string> lines;  // without terminators; LF re-emitted
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }

  // find the byte span of each line's last field and validate its scheme
  struct Labeled {
    std::size_t line_index;
    std::size_t field_begin, field_len;
    std::string label;
  };
  std::vector<std::vector<Labeled>> sentences(1);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::string& l = lines[li];
    std::size_t end = l.find_last_not_of(" \t");
    if (end == std::string::npos) {  // blank: sentence boundary
      if (!sentences.back().empty()) sentences.emplace_back();
      continue;
    }
    if (l.rfind("-DOCSTART-", 0) == 0) continue;  // copied verbatim
    std::size_t begin = l.find_last_of(" \t", end);
    begin = begin == std::string::npos ? 0 : begin + 1;
    if (begin == 0) {
      raise(ErrorKind::parse,
            input_path + ":" + std::to_string(li + 1) + ": token line has no label column");
    }
    Labeled entry{li, begin, end - begin + 1, l.substr(begin, end - begin + 1)};
    try {
      const ParsedTag t = parse_tag(entry.label);
      if (from == "bio" && (t.role == TagRole::E || t.role == TagRole::S)) {
        raise(ErrorKind::scheme, "tag '" + entry.label + "' is not BIO");
      }
    } catch (const Error& e) {
      std::string msg = e.what();
      const std::string prefix = std::string(to_string(ErrorKind::scheme)) + ": ";
      if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
      raise(ErrorKind::scheme, input_path + ":" + std::to_string(li + 1) + ": " + msg);
    }
    sentences.back().push_back(std::move(entry));
  }

  for (auto& sentence : sentences) {
    if (sentence.empty()) continue;
    std::vector<std::string> labels;
    for (const auto& e : sentence) labels.push_back(e.label);
    const std::vector<std::string> converted =
        from == "bio" ? bio_to_bioes(labels) : bioes_to_bio(labels);
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      const Labeled& e = sentence[i];
      lines[e.line_index].replace(e.field_begin, e.field_len, converted[i]);
    }
  }

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!output_path.empty()) {
    file.open(output_path, std::ios::binary | std::ios::trunc);
    if (!file) raise(ErrorKind::io, "cannot write '" + output_path + "'");
    out = &file;
  }
  for (const auto& l : lines) *out << l << '\n';
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& sizes) {
  ModelDims dims;
  std::size_t sentence_len;
  std::size_t num_labels;
  if (sizes == "small") {
    dims = {4, 4, 3, 8, 8};
    sentence_len = 3;
    num_labels = 5;
  } else if (sizes == "tiny") {
    dims = {2, 2, 3, 4, 3};
    sentence_len = 2;
    num_labels = 3;
  } else {
    raise(ErrorKind::contract, "sizes must be small or tiny");
  }

  Vocabs vocabs;
  for (int i = 0; i < 8; ++i) vocabs.words.add("w" + std::to_string(i));
  for (char c = 'a'; c <= 'f'; ++c) vocabs.chars.add(std::string(1, c));
  const std::vector<std::string> label_pool{"O", "B-X", "E-X", "S-X", "I-X"};
  for (std::size_t i = 0; i < num_labels; ++i) vocabs.labels.add(label_pool[i]);

  ModelFlags flags;
  flags.dropout_rate = 0.0;  // the objective must be deterministic
  Model model(dims, flags, vocabs, seed);

  // a fixed 2-sentence batch of random indices
  Rng rng(seed ^ 0xC0FFEE);
  std::vector<EncodedSentence> batch;
  for (int s = 0; s < 2; ++s) {
    EncodedSentence enc;
    for (std::size_t t = 0; t < sentence_len; ++t) {
      enc.word_ids.push_back(static_cast<int>(2 + rng.index(vocabs.words.size() - 2)));
      std::vector<int> chars;
      const std::size_t m = 1 + rng.index(4);
      for (std::size_t c = 0; c < m; ++c) {
        chars.push_back(static_cast<int>(2 + rng.index(vocabs.chars.size() - 2)));
      }
      enc.char_ids.push_back(std::move(chars));
      enc.label_ids.push_back(static_cast<int>(rng.index(num_labels)));
    }
    batch.push_back(std::move(enc));
  }

  auto objective = [&](Graph& g) {
    TensorPtr total;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      TensorPtr loss = model.sentence_loss(g, batch[b], /*train=*/false);
      total = b == 0 ? loss : add(g, total, loss);
    }
    return scale(g, total, 1.0 / static_cast<double>(batch.size()));
  };

  const auto params = model.named_params();
  GradCheckOptions opts;
  opts.seed = seed + 1;
  const auto report = grad_check(objective, params, opts);

  constexpr double kTolerance = 1e-4;
  int failures = 0;
  for (const auto& gc : report) {
    std::printf("group %-18s max_rel_err %.3e (%zu coordinates)\n", gc.group.c_str(),
                gc.max_rel_err, gc.coords_checked);
    if (gc.max_rel_err > kTolerance) ++failures;
  }
  if (failures > 0) {
    for (const auto& gc : report) {
      if (gc.max_rel_err > kTolerance) {
        std::fprintf(stderr, "error: gradient check failed for group '%s' (%.3e > %.0e)\n",
                     gc.group.c_str(), gc.max_rel_err, kTolerance);
      }
    }
    return 1;
  }
  std::printf("all %zu parameter groups within %.0e\n", report.size(), kTolerance);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BiLSTM-CNN-CRF sequence labeling toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a tagger");
  train->add_option("--train", train_args.train_path, "training corpus (CoNLL columns)")
      ->required();
  train->add_option("--dev", train_args.dev_path, "development corpus")->required();
  train->add_option("--test", train_args.test_path, "optional test corpus");
  train->add_option("--embeddings", train_args.embeddings_path, "pretrained embedding text file");
  train->add_option("--config", train_args.config_path, "key=value config file");
  auto* seed_opt = train->add_option("--seed", train_args.seed, "random seed");
  train->add_option("--task", train_args.task, "ner or pos")
      ->check(CLI::IsMember({"ner", "pos"}))
      ->default_val("ner");
  train->add_flag("--no-char-cnn", train_args.no_char_cnn, "drop the character CNN");
  train->add_flag("--no-bilstm", train_args.no_bilstm, "drop the BiLSTM");
  train->add_flag("--no-crf", train_args.no_crf, "per-token softmax instead of the CRF");
  train->add_flag("--lowercase", train_args.lowercase, "lowercase tokens for embedding lookup");
  train->add_flag("--freeze-embeddings", train_args.freeze_embeddings,
                  "do not fine-tune word embeddings");
  train->add_option("--out", train_args.out_dir, "output directory")->required();

  std::string tag_model, tag_input, tag_output, tag_scheme = "bioes";
  CLI::App* tag = app.add_subcommand("tag", "tag a file with a trained model");
  tag->add_option("--model", tag_model, "checkpoint path")->required();
  tag->add_option("--input", tag_input, "input file (CoNLL or one token per line)")->required();
  tag->add_option("--output", tag_output, "output file")->required();
  tag->add_option("--scheme", tag_scheme, "output tag scheme")
      ->check(CLI::IsMember({"bioes", "bio"}));

  std::string eval_gold, eval_pred, eval_task = "ner";
  CLI::App* evalc = app.add_subcommand("eval", "score predictions against gold");
  evalc->add_option("--gold", eval_gold, "gold file")->required();
  evalc->add_option("--pred", eval_pred, "prediction file (same path: interchange format)")
      ->required();
  evalc->add_option("--task", eval_task, "ner or pos")->check(CLI::IsMember({"ner", "pos"}));

  std::string conv_input, conv_output, conv_from, conv_to;
  CLI::App* convert = app.add_subcommand("convert", "convert tagging schemes");
  convert->add_option("--input", conv_input, "input file")->required();
  convert->add_option("--output", conv_output, "output file (default: stdout)");
  convert->add_option("--from", conv_from, "source scheme")
      ->required()
      ->check(CLI::IsMember({"bio", "bioes"}));
  convert->add_option("--to", conv_to, "target scheme")
      ->required()
      ->check(CLI::IsMember({"bio", "bioes"}));

  std::uint64_t gc_seed = 0;
  bool gc_seed_given = false;
  std::string gc_sizes = "small";
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  auto* gc_seed_opt = gradcheck->add_option("--seed", gc_seed, "random seed");
  gradcheck->add_option("--sizes", gc_sizes, "model sizes")
      ->check(CLI::IsMember({"small", "tiny"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2, --help exits 0
  }

  if (app.got_subcommand(convert) && conv_from == conv_to) {
    std::fprintf(stderr, "convert: --from and --to must name different schemes\n");
    return 2;
  }

  train_args.seed_given = seed_opt->count() > 0;
  gc_seed_given = gc_seed_opt->count() > 0;
  if (!gc_seed_given) {
    gc_seed = 1;
    if (const char* env = std::getenv("SEQTAG_SEED")) gc_seed = std::strtoull(env, nullptr, 10);
  }

  try {
    if (app.got_subcommand(train)) return cmd_train(train_args);
    if (app.got_subcommand(tag)) return cmd_tag(tag_model, tag_input, tag_output, tag_scheme);
    if (app.got_subcommand(evalc)) return cmd_eval(eval_gold, eval_pred, eval_task);
    if (app.got_subcommand(convert)) return cmd_convert(conv_input, conv_output, conv_from, conv_to);
    if (app.got_subcommand(gradcheck)) return cmd_gradcheck(gc_seed, gc_sizes);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
