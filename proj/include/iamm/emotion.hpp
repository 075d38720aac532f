#pragma once

// Multi-source emotion prediction. Each source matrix is attention-pooled by
// an aggregation network and projected to emotion logits; the four resulting
// distributions are combined multiplicatively.

#include <array>
#include <random>
#include <string>
#include <vector>

#include "iamm/layers.hpp"
#include "iamm/topk.hpp"
#include "iamm/types.hpp"

namespace iamm {

template <typename Scalar>
struct AggregatorParams {
  Linear<Scalar> project;                  // W, d x d
  Parameter<Scalar>* attention = nullptr;  // v, d x 1
  Linear<Scalar> output;                   // d x d_e

  static AggregatorParams create(ParamStore<Scalar>& store, const std::string& name, Index width, Index labels,
                                 std::mt19937_64& rng) {
    AggregatorParams p;
    p.project = Linear<Scalar>::create(store, name + ".project", width, width, rng, false);
    p.attention = &store.create(name + ".attention", width, 1);
    init_xavier(*p.attention, rng);
    p.output = Linear<Scalar>::create(store, name + ".output", width, labels, rng);
    return p;
  }
};

// score_t = v . tanh(W h_t); pooled = sum_t softmax(score)_t h_t; logits = W_o pooled + b_o.
template <typename Scalar>
Var<Scalar> aggregate(Tape<Scalar>& tape, const AggregatorParams<Scalar>& p, const Var<Scalar>& h,
                      const std::vector<bool>& pad = {}) {
  if (h.rows() == 0) throw InputError("aggregate: empty input");
  if (!pad.empty() && static_cast<Index>(pad.size()) != h.rows()) throw InputError("aggregate: mask length mismatch");
  if (!pad.empty() && std::find(pad.begin(), pad.end(), false) == pad.end())
    throw InputError("aggregate: every row is masked");
  Var<Scalar> scores = transpose(matmul(tanh(p.project(tape, h)), tape.param(*p.attention)));
  Matrix<Scalar> mask;
  if (!pad.empty()) {
    mask = Matrix<Scalar>::Zero(1, h.rows());
    for (std::size_t t = 0; t < pad.size(); ++t)
      if (pad[t]) mask(0, static_cast<Index>(t)) = masked_logit<Scalar>();
  }
  Var<Scalar> pooled = matmul(softmax_rows(scores, mask), h);
  return p.output(tape, pooled);
}

template <typename Scalar>
struct EmotionParams {
  AggregatorParams<Scalar> utterance;  // AN_u, context
  AggregatorParams<Scalar> situation;  // only used when not shared with AN_u
  AggregatorParams<Scalar> memory;     // AN_a
  AggregatorParams<Scalar> knowledge;  // AN_cs
  bool shared = true;

  static EmotionParams create(ParamStore<Scalar>& store, Index width, bool share_utterance, std::mt19937_64& rng) {
    EmotionParams p;
    p.shared = share_utterance;
    p.utterance = AggregatorParams<Scalar>::create(store, "an_utterance", width, kNumEmotions, rng);
    if (!share_utterance) p.situation = AggregatorParams<Scalar>::create(store, "an_situation", width, kNumEmotions, rng);
    p.memory = AggregatorParams<Scalar>::create(store, "an_memory", width, kNumEmotions, rng);
    p.knowledge = AggregatorParams<Scalar>::create(store, "an_knowledge", width, kNumEmotions, rng);
    return p;
  }

  const AggregatorParams<Scalar>& situation_net() const { return shared ? utterance : situation; }
};

enum EmotionSource { kFromContext = 0, kFromSituation = 1, kFromMemory = 2, kFromKnowledge = 3 };
inline constexpr int kNumEmotionSources = 4;

template <typename Scalar>
struct EmotionDistributions {
  std::array<Var<Scalar>, kNumEmotionSources> log_probs;  // 1 x d_e each

  Matrix<Scalar> probabilities(int source) const { return log_probs[source].value().array().exp().matrix(); }
};

template <typename Scalar>
EmotionDistributions<Scalar> emotion_distributions(Tape<Scalar>& tape, const EmotionParams<Scalar>& p,
                                                   const Var<Scalar>& context, const Var<Scalar>& situation,
                                                   const Var<Scalar>& memory, const Var<Scalar>& knowledge) {
  EmotionDistributions<Scalar> out;
  out.log_probs[kFromContext] = log_softmax_rows(aggregate(tape, p.utterance, context));
  out.log_probs[kFromSituation] = log_softmax_rows(aggregate(tape, p.situation_net(), situation));
  out.log_probs[kFromMemory] = log_softmax_rows(aggregate(tape, p.memory, memory));
  out.log_probs[kFromKnowledge] = log_softmax_rows(aggregate(tape, p.knowledge, knowledge));
  return out;
}

// -log of the product of the four gold-label probabilities.
template <typename Scalar>
Var<Scalar> emotion_loss(const EmotionDistributions<Scalar>& d, int gold) {
  if (gold < 0 || gold >= kNumEmotions) throw InputError("emotion_loss: gold label out of range");
  Var<Scalar> total = element(d.log_probs[0], 0, gold);
  for (int s = 1; s < kNumEmotionSources; ++s) total = total + element(d.log_probs[s], 0, gold);
  return Scalar(-1) * total;
}

// Argmax of the summed log-probabilities (the product rule), lowest id on ties.
template <typename Scalar>
int predict_emotion(const std::array<Matrix<Scalar>, kNumEmotionSources>& log_probs) {
  Matrix<Scalar> total = log_probs[0];
  for (int s = 1; s < kNumEmotionSources; ++s) total += log_probs[s];
  return static_cast<int>(topk(row_span(total, 0), 1).indices.front());
}

template <typename Scalar>
int predict_emotion(const EmotionDistributions<Scalar>& d) {
  std::array<Matrix<Scalar>, kNumEmotionSources> lp;
  for (int s = 0; s < kNumEmotionSources; ++s) lp[s] = d.log_probs[s].value();
  return predict_emotion(lp);
}

}  // namespace iamm
