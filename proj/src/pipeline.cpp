#include "iamm/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace iamm {

using nlohmann::json;

Split load_split(const std::string& corpus_path, const std::string& knowledge_path) {
  Split s;
  s.dialogues = load_corpus(corpus_path);
  if (knowledge_path.empty()) {
    std::istringstream none;
    s.knowledge = read_knowledge(none, s.dialogues, &s.knowledge_report);
  } else {
    s.knowledge = load_knowledge(knowledge_path, s.dialogues, &s.knowledge_report);
  }
  return s;
}

void encode_split(Split& split, const Vocab& vocab) { split.encoded = encode_corpus(split.dialogues, split.knowledge, vocab); }

Dataset load_dataset(const RunConfig& config) {
  if (config.train_path.empty()) throw ConfigError("train_path is not set");
  Dataset ds;
  ds.train = load_split(config.train_path, config.train_knowledge_path);
  ds.vocab = build_vocab(ds.train.dialogues, ds.train.knowledge, config.min_freq);
  encode_split(ds.train, ds.vocab);
  if (!config.valid_path.empty()) {
    ds.valid = load_split(config.valid_path, config.valid_knowledge_path);
    encode_split(ds.valid, ds.vocab);
  }
  if (!config.test_path.empty()) {
    ds.test = load_split(config.test_path, config.test_knowledge_path);
    encode_split(ds.test, ds.vocab);
  }
  return ds;
}

AdamOptions adam_options(const RunConfig& c) { return {c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_eps}; }

SyntheticSpec held_out_spec(const SyntheticSpec& train, int offset) {
  SyntheticSpec s = train;
  s.seed = train.seed + static_cast<std::uint64_t>(offset);
  s.num_dialogues = std::max(1, train.num_dialogues / 5);
  return s;
}

namespace {

void make_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
}

}  // namespace

void write_synthetic(const SyntheticSpec& spec, const std::string& corpus_path, const std::string& knowledge_path) {
  const auto syn = generate_synthetic(spec);
  make_parent(corpus_path);
  std::ofstream out(corpus_path);
  if (!out) throw IoError("cannot write " + corpus_path);
  write_corpus(syn.dialogues, out);
  if (!knowledge_path.empty()) {
    make_parent(knowledge_path);
    std::ofstream k(knowledge_path);
    if (!k) throw IoError("cannot write " + knowledge_path);
    write_knowledge(syn.dialogues, syn.knowledge, k);
  }
}

std::string train_report_json(const TrainReport& r) {
  return json{{"epoch_loss", r.epoch_loss},
              {"valid_loss", r.valid_loss},
              {"first_batch_loss", r.first_batch_loss},
              {"best_valid_loss", r.best_valid_loss},
              {"best_iteration", r.best_iteration},
              {"iterations", r.iterations}}
      .dump();
}

std::string eval_report_json(const EvalReport& r) {
  return json{{"acc", r.acc}, {"ppl", r.ppl}, {"dist1", r.dist1}, {"dist2", r.dist2}, {"n_dialogues", r.n_dialogues}}
      .dump();
}

std::vector<std::string> response_tokens(const std::vector<Index>& ids, const Vocab& vocab) {
  std::vector<std::string> out;
  for (Index id : ids) {
    if (id == Vocab::kEos) break;
    out.push_back(vocab.token(id));
  }
  return out;
}

std::string pair_label(Index utterance, PairKind kind) {
  const char* what = kind == PairKind::kSituation ? "situation" : kind == PairKind::kHistory ? "history" : "memory";
  return "u" + std::to_string(utterance) + "-" + what;
}

}  // namespace iamm
