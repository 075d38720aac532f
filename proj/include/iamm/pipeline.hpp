#pragma once

// Data loading, training, evaluation and associated-word extraction on top
// of IammModel.

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "iamm/analysis.hpp"
#include "iamm/checkpoint.hpp"
#include "iamm/instruction.hpp"
#include "iamm/metrics.hpp"
#include "iamm/model.hpp"
#include "iamm/optimizer.hpp"

namespace iamm {

struct Split {
  std::vector<Dialogue> dialogues;
  KnowledgeMap knowledge;
  KnowledgeReport knowledge_report;
  std::vector<EncodedDialogue> encoded;  // filled by encode_split
};

// An empty knowledge path leaves every relation as the placeholder.
Split load_split(const std::string& corpus_path, const std::string& knowledge_path);
void encode_split(Split& split, const Vocab& vocab);

struct Dataset {
  Vocab vocab;
  Split train, valid, test;
};

// Loads the splits whose paths are set; the vocabulary comes from the
// training split.
Dataset load_dataset(const RunConfig& config);

AdamOptions adam_options(const RunConfig& config);

// Held-out synthetic splits reuse the training spec with a shifted seed
// (valid +1, test +2) and a fifth of the dialogues.
SyntheticSpec held_out_spec(const SyntheticSpec& train, int offset);
void write_synthetic(const SyntheticSpec& spec, const std::string& corpus_path, const std::string& knowledge_path);

struct TrainReport {
  std::vector<double> epoch_loss;  // mean training loss per epoch
  std::vector<double> valid_loss;  // per validation point
  double first_batch_loss = 0.0;
  double best_valid_loss = 0.0;
  long best_iteration = 0;
  long iterations = 0;
};

std::string train_report_json(const TrainReport& r);

struct TrainHooks {
  std::function<void(const std::string&)> log;
  bool restore_best = true;  // load the best-validation parameters back at the end
};

template <typename Scalar>
double mean_loss(const IammModel<Scalar>& model, const std::vector<EncodedDialogue>& data) {
  if (data.empty()) throw InputError("mean_loss: empty split");
  double total = 0.0;
  for (const auto& d : data) {
    Tape<Scalar> tape(false);
    auto f = model.forward(tape, d);
    if (auto bad = nonfinite_module(f)) throw NumericError("non-finite values in module " + *bad + " (dialogue " + d.id + ")");
    total += static_cast<double>(f.loss.value()(0, 0));
  }
  return total / static_cast<double>(data.size());
}

inline std::string module_of(const std::string& param_name) { return param_name.substr(0, param_name.find('.')); }

// Adam on L = L_gen + L_e, averaged over each batch. Data order is a
// seeded shuffle per epoch. When `checkpoint_path` is non-empty the best
// model by validation loss is written there (validation falls back to the
// training split when `valid` is empty).
template <typename Scalar>
TrainReport train_model(IammModel<Scalar>& model, Adam<Scalar>& adam, const Vocab& vocab,
                        const std::vector<EncodedDialogue>& train, const std::vector<EncodedDialogue>& valid,
                        const std::string& checkpoint_path, const TrainHooks& hooks = {}) {
  const RunConfig& cfg = model.config();
  if (train.empty()) throw InputError("train: empty training split");
  const auto& vsplit = valid.empty() ? train : valid;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const long per_epoch = static_cast<long>((train.size() + bs - 1) / bs);
  const long total = cfg.epochs > 0 ? per_epoch * cfg.epochs : cfg.max_iterations;
  const long validate_every = cfg.validate_every > 0 ? cfg.validate_every : per_epoch;

  TrainReport report;
  report.best_valid_loss = std::numeric_limits<double>::infinity();
  std::vector<Matrix<Scalar>> best;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  auto& params = model.params();
  auto log = [&](const std::string& s) {
    if (hooks.log) hooks.log(s);
  };

  long it = 0;
  double epoch_sum = 0.0;
  std::size_t epoch_count = 0;
  while (it < total) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size() && it < total; start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      const Scalar scale = Scalar(1) / static_cast<Scalar>(end - start);
      params.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const auto& d = train[order[b]];
        Tape<Scalar> tape;
        auto f = model.forward(tape, d);
        if (auto bad = nonfinite_module(f))
          throw NumericError("non-finite values in module " + *bad + " (dialogue " + d.id + ", iteration " +
                             std::to_string(it) + ")");
        batch_loss += static_cast<double>(f.loss.value()(0, 0));
        tape.backward(scale * f.loss);
      }
      for (const auto& p : params)
        if (!all_finite(p.grad))
          throw NumericError("non-finite gradient in module " + module_of(p.name) + " (parameter " + p.name + ")");
      adam.step(params);
      ++it;
      batch_loss /= static_cast<double>(end - start);
      if (it == 1) report.first_batch_loss = batch_loss;
      epoch_sum += batch_loss * static_cast<double>(end - start);
      epoch_count += end - start;

      if (it % validate_every == 0 || it == total) {
        const double vl = mean_loss(model, vsplit);
        report.valid_loss.push_back(vl);
        log("iteration " + std::to_string(it) + " valid_loss " + std::to_string(vl));
        if (vl < report.best_valid_loss) {
          report.best_valid_loss = vl;
          report.best_iteration = it;
          best.clear();
          for (const auto& p : params) best.push_back(p.value);
          if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, model, vocab, &adam.state(), it);
        }
      }
    }
    if (epoch_count > 0) {
      report.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_count));
      log("epoch " + std::to_string(report.epoch_loss.size()) + " train_loss " + std::to_string(report.epoch_loss.back()));
    }
    epoch_sum = 0.0;
    epoch_count = 0;
  }
  report.iterations = it;
  if (hooks.restore_best && !best.empty()) {
    std::size_t i = 0;
    for (auto& p : params) p.value = best[i++];
  }
  return report;
}

struct EvalReport {
  double acc = 0.0;
  double ppl = 0.0;
  double dist1 = 0.0;
  double dist2 = 0.0;
  std::size_t n_dialogues = 0;
};

std::string eval_report_json(const EvalReport& r);

// Response tokens of a generated sequence, without [EOS].
std::vector<std::string> response_tokens(const std::vector<Index>& ids, const Vocab& vocab);

template <typename Scalar>
EvalReport evaluate(const IammModel<Scalar>& model, const Vocab& vocab, const std::vector<EncodedDialogue>& data,
                    Index max_decode_length, std::vector<std::vector<Index>>* generations = nullptr,
                    std::vector<int>* predictions = nullptr) {
  if (model.vocab_size() != vocab.size())
    throw SchemaError("evaluate: model vocabulary size " + std::to_string(model.vocab_size()) +
                      " does not match vocabulary size " + std::to_string(vocab.size()));
  if (data.empty()) throw InputError("evaluate: empty split");
  PerplexityAccumulator ppl;
  std::vector<int> pred, gold;
  std::vector<std::vector<std::string>> responses;
  for (const auto& d : data) {
    Tape<Scalar> tape(false);
    auto f = model.forward(tape, d);
    if (auto bad = nonfinite_module(f)) throw NumericError("non-finite values in module " + *bad + " (dialogue " + d.id + ")");
    ppl.add(static_cast<double>(f.generation_loss.value()(0, 0)), f.targets.size());
    pred.push_back(predict_emotion(f.emotion));
    gold.push_back(d.emotion);
    auto gen = greedy_decode(tape, model.generation(), model.encoding().embedding, f.decoder, max_decode_length);
    responses.push_back(response_tokens(gen, vocab));
    if (generations) generations->push_back(std::move(gen));
  }
  EvalReport r;
  r.acc = accuracy(pred, gold);
  r.ppl = ppl.value();
  r.dist1 = distinct_n(responses, 1);
  r.dist2 = distinct_n(responses, 2);
  r.n_dialogues = data.size();
  if (predictions) *predictions = std::move(pred);
  return r;
}

// One resolved second-order selection on the explicit track.
struct ResolvedSelection {
  Index utterance;  // 1-based
  PairKind kind;
  Index keyword_token;
  Index word_token;
  double score;  // keyword score x association score
};

template <typename Scalar>
std::vector<ResolvedSelection> explicit_selections(const ForwardPass<Scalar>& f) {
  std::vector<ResolvedSelection> out;
  for (const auto& b : f.iteration.memory.explicit_blocks) {
    for (const auto& r : b.records) {
      const auto& kw_side = r.direction == Direction::kAtoB ? b.tokens_a : b.tokens_b;
      const auto& word_side = r.direction == Direction::kAtoB ? b.tokens_b : b.tokens_a;
      const Index kw = kw_side[static_cast<std::size_t>(r.keyword)];
      const Index w = word_side[static_cast<std::size_t>(r.word)];
      if (w == kNoToken || Vocab::is_reserved(w)) continue;
      out.push_back({b.utterance, b.kind, kw, w,
                     static_cast<double>(r.keyword_score) * static_cast<double>(r.word_score)});
    }
  }
  return out;
}

template <typename Scalar>
void collect_associated_words(const IammModel<Scalar>& model, const Vocab& vocab, const EncodedDialogue& d,
                              AssociatedWordCollector& out) {
  Tape<Scalar> tape(false);
  auto f = model.encode(tape, d);
  for (const auto& s : explicit_selections(f)) out.add(vocab.token(s.word_token), s.score, d.id);
}

template <typename Scalar>
std::vector<AssociatedWordRecord> collect_associated_words(const IammModel<Scalar>& model, const Vocab& vocab,
                                                           const std::vector<EncodedDialogue>& data) {
  AssociatedWordCollector c;
  for (const auto& d : data) collect_associated_words(model, vocab, d, c);
  return c.records();
}

std::string pair_label(Index utterance, PairKind kind);

// (keyword, associated word) pairs per explicit sentence pair, first
// occurrence order, duplicates and special tokens dropped.
template <typename Scalar>
std::vector<AssociationGroup> association_groups(const IammModel<Scalar>& model, const Vocab& vocab,
                                                 const EncodedDialogue& d) {
  Tape<Scalar> tape(false);
  auto f = model.encode(tape, d);
  std::vector<AssociationGroup> groups;
  for (const auto& s : explicit_selections(f)) {
    if (s.keyword_token == kNoToken || Vocab::is_reserved(s.keyword_token)) continue;
    const std::string label = pair_label(s.utterance, s.kind);
    if (groups.empty() || groups.back().label != label) groups.push_back({label, {}});
    std::pair<std::string, std::string> p{vocab.token(s.keyword_token), vocab.token(s.word_token)};
    auto& pairs = groups.back().pairs;
    if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) pairs.push_back(std::move(p));
  }
  return groups;
}

}  // namespace iamm
