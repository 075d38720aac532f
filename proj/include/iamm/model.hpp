#pragma once

// The full model: explicit and implicit encoding, iterative association,
// memory encoding, multi-source emotion prediction and gated copy-generation
// decoding, with the combined training loss.

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "iamm/config.hpp"
#include "iamm/emotion.hpp"
#include "iamm/encoding.hpp"
#include "iamm/generation.hpp"
#include "iamm/iteration.hpp"

namespace iamm {

inline TransformerShape transformer_shape(const RunConfig& c) {
  return {c.encoder_layers, c.encoder_heads, c.d, c.ffn_size()};
}

inline AssociationConfig association_config(const RunConfig& c) { return {c.H, c.d_h, c.k_1, c.k_2}; }

template <typename Scalar>
struct ForwardPass {
  DialogueEncodings<Scalar> encodings;
  IterationResult<Scalar> iteration;
  MemoryEncoding<Scalar> memory;
  EmotionDistributions<Scalar> emotion;
  std::optional<WordSelection<Scalar>> selection;
  DecoderState<Scalar> decoder;

  // Filled by teacher-forced decoding only.
  FusedDecode<Scalar> decode;
  OutputDistribution<Scalar> output;
  std::vector<Index> targets;
  Var<Scalar> emotion_loss;
  Var<Scalar> generation_loss;
  Var<Scalar> loss;
};

template <typename Scalar>
class IammModel {
 public:
  IammModel(const RunConfig& config, Index vocab_size) : config_(config), store_(std::make_unique<ParamStore<Scalar>>()) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    const auto shape = transformer_shape(config_);
    const auto assoc = association_config(config_);
    encoding_ = EncodingParams<Scalar>::create(*store_, vocab_size, shape, rng);
    explicit_iam_ = IAMParams<Scalar>::create(*store_, "iam_explicit", config_.d, assoc, rng);
    implicit_iam_ = IAMParams<Scalar>::create(*store_, "iam_implicit", config_.d, assoc, rng);
    memory_encoder_ = EncoderParams<Scalar>::create(*store_, "enc_memory", shape, rng);
    emotion_ = EmotionParams<Scalar>::create(*store_, config_.d, config_.share_utterance_aggregator, rng);
    generation_ = GenerationParams<Scalar>::create(*store_, vocab_size, shape, config_.k_3, rng);
  }

  const RunConfig& config() const { return config_; }
  ParamStore<Scalar>& params() { return *store_; }
  const ParamStore<Scalar>& params() const { return *store_; }
  Index vocab_size() const { return encoding_.embedding.vocab_size(); }

  const EncodingParams<Scalar>& encoding() const { return encoding_; }
  const IAMParams<Scalar>& explicit_iam() const { return explicit_iam_; }
  const IAMParams<Scalar>& implicit_iam() const { return implicit_iam_; }
  const EncoderParams<Scalar>& memory_encoder() const { return memory_encoder_; }
  const EmotionParams<Scalar>& emotion() const { return emotion_; }
  const GenerationParams<Scalar>& generation() const { return generation_; }

  IterationOptions iteration_options() const {
    return {!config_.no_explicit_association, !config_.no_implicit_association};
  }

  // Everything up to (not including) response decoding.
  ForwardPass<Scalar> encode(Tape<Scalar>& tape, const EncodedDialogue& d) const {
    ForwardPass<Scalar> f;
    f.encodings.dialogue = &d;
    f.encodings.explicit_enc = encode_explicit(tape, d, encoding_);
    f.encodings.implicit_enc = encode_knowledge(tape, d, encoding_);
    f.iteration = iterate_dialogue(tape, f.encodings, explicit_iam_, implicit_iam_, iteration_options());
    f.memory = encode_memory(tape, memory_encoder_, f.iteration.values, f.iteration.pad);
    const auto& ex = f.encodings.explicit_enc;
    f.emotion = emotion_distributions(tape, emotion_, ex.context, ex.situation, f.memory.encoded,
                                      f.encodings.implicit_enc.refined);
    f.decoder.context = ex.context;
    f.decoder.source_ids = d.context_ids();
    if (!config_.no_word_selector) {
      f.selection = select_words(tape, f.memory.encoded, generation_.selector);
      f.decoder.selected = f.selection->selected;
    }
    return f;
  }

  // Teacher-forced forward pass with L = L_gen + L_e.
  ForwardPass<Scalar> forward(Tape<Scalar>& tape, const EncodedDialogue& d) const {
    ForwardPass<Scalar> f = encode(tape, d);
    const auto input = decoder_input(d.response);
    f.targets = decoder_target(d.response);
    Var<Scalar> prefix = embed(tape, encoding_.embedding, input);
    const Var<Scalar>* sel = f.decoder.selected ? &*f.decoder.selected : nullptr;
    f.decode = decode_fuse(tape, generation_, prefix, f.decoder.context, sel);
    f.output = output_distribution(tape, generation_, f.decode, f.decoder.context, prefix, f.decoder.source_ids);
    f.emotion_loss = iamm::emotion_loss(f.emotion, d.emotion);
    f.generation_loss = iamm::generation_loss(f.output.probs, f.targets);
    f.loss = f.generation_loss + f.emotion_loss;
    return f;
  }

  int predict(const EncodedDialogue& d) const {
    Tape<Scalar> tape(false);
    return predict_emotion(encode(tape, d).emotion);
  }

  std::vector<Index> generate(const EncodedDialogue& d, Index max_len) const {
    Tape<Scalar> tape(false);
    auto f = encode(tape, d);
    return greedy_decode(tape, generation_, encoding_.embedding, f.decoder, max_len);
  }

 private:
  RunConfig config_;
  std::unique_ptr<ParamStore<Scalar>> store_;
  EncodingParams<Scalar> encoding_;
  IAMParams<Scalar> explicit_iam_;
  IAMParams<Scalar> implicit_iam_;
  EncoderParams<Scalar> memory_encoder_;
  EmotionParams<Scalar> emotion_;
  GenerationParams<Scalar> generation_;
};

// First module whose forward values are not all finite, in pipeline order.
template <typename Scalar>
std::optional<std::string> nonfinite_module(const ForwardPass<Scalar>& f) {
  const auto& ex = f.encodings.explicit_enc;
  for (const auto& u : ex.utterances)
    if (!all_finite(u.value())) return "encoding";
  if (!all_finite(ex.context.value()) || !all_finite(ex.situation.value()) ||
      !all_finite(f.encodings.implicit_enc.refined.value()))
    return "encoding";
  if (!all_finite(f.iteration.values.value())) return "association";
  if (!all_finite(f.memory.encoded.value())) return "iteration";
  for (const auto& lp : f.emotion.log_probs)
    if (!all_finite(lp.value())) return "emotion";
  if (f.emotion_loss.valid() && !all_finite(f.emotion_loss.value())) return "emotion";
  if (f.output.probs.valid() && !all_finite(f.output.probs.value())) return "generation";
  if (f.generation_loss.valid() && !all_finite(f.generation_loss.value())) return "generation";
  return std::nullopt;
}

}  // namespace iamm
