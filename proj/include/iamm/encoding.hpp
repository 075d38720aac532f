#pragma once

// Explicit (utterances, dialogue, situation) and implicit (commonsense
// relation) representations of one dialogue.

#include <random>
#include <string>
#include <vector>

#include "iamm/corpus.hpp"
#include "iamm/layers.hpp"

namespace iamm {

template <typename Scalar>
struct EncodingParams {
  EmbeddingTable<Scalar> embedding;
  EncoderParams<Scalar> utterance;         // per-utterance encoder
  EncoderParams<Scalar> context;           // over the concatenated utterances
  EncoderParams<Scalar> situation;
  EncoderParams<Scalar> knowledge;         // one relation text at a time
  EncoderParams<Scalar> knowledge_refine;  // over the 10 combined relation vectors

  static EncodingParams create(ParamStore<Scalar>& store, Index vocab_size, const TransformerShape& shape,
                               std::mt19937_64& rng) {
    EncodingParams p;
    p.embedding = EmbeddingTable<Scalar>::create(store, "embedding", vocab_size, shape.hidden, rng);
    p.utterance = EncoderParams<Scalar>::create(store, "enc_utterance", shape, rng);
    p.context = EncoderParams<Scalar>::create(store, "enc_context", shape, rng);
    p.situation = EncoderParams<Scalar>::create(store, "enc_situation", shape, rng);
    p.knowledge = EncoderParams<Scalar>::create(store, "enc_knowledge", shape, rng);
    p.knowledge_refine = EncoderParams<Scalar>::create(store, "enc_knowledge_refine", shape, rng);
    return p;
  }
};

template <typename Scalar>
struct ExplicitEncodings {
  std::vector<Var<Scalar>> utterances;       // H^i_u, m_i x d
  Var<Scalar> context;                       // H_c, (sum m_i) x d
  Var<Scalar> situation;                     // H_s, m x d
  std::vector<Var<Scalar>> utterance_words;  // E^i_w, raw word vectors
  Var<Scalar> situation_words;               // E_s
};

template <typename Scalar>
struct ImplicitEncodings {
  // sources[0] is the situation, sources[i] utterance i; each 5 x d, one row
  // per relation type in kRelations order.
  std::vector<Var<Scalar>> sources;
  Var<Scalar> combined;  // situation rows then last-utterance rows, 10 x d
  Var<Scalar> refined;
};

template <typename Scalar>
struct UtteranceEncodings {
  std::vector<Var<Scalar>> utterances;
  Var<Scalar> context;
};

template <typename Scalar>
UtteranceEncodings<Scalar> encode_utterances(Tape<Scalar>& tape, const EncodedDialogue& d,
                                             const EncodingParams<Scalar>& p) {
  if (d.utterances.empty()) throw InputError("encode_utterances: dialogue " + d.id + " has no utterances");
  UtteranceEncodings<Scalar> out;
  Index total = 0;
  for (std::size_t i = 0; i < d.utterances.size(); ++i) {
    const std::vector<Role> roles(d.utterances[i].size(), d.roles[i]);
    out.utterances.push_back(transformer_encode(tape, p.utterance, embed(tape, p.embedding, d.utterances[i], &roles)));
    total += static_cast<Index>(d.utterances[i].size());
  }
  // Fresh global positions so that cross-utterance order is visible.
  Var<Scalar> joined = concat_rows(std::span<const Var<Scalar>>(out.utterances));
  joined = joined + tape.constant(positional_encoding<Scalar>(total, p.embedding.width()));
  out.context = transformer_encode(tape, p.context, joined);
  return out;
}

template <typename Scalar>
Var<Scalar> encode_situation(Tape<Scalar>& tape, const EncodedDialogue& d, const EncodingParams<Scalar>& p) {
  if (d.situation.size() <= 1) throw InputError("encode_situation: dialogue " + d.id + " has an empty situation");
  return transformer_encode(tape, p.situation, embed(tape, p.embedding, d.situation));
}

template <typename Scalar>
ImplicitEncodings<Scalar> encode_knowledge(Tape<Scalar>& tape, const EncodedDialogue& d,
                                           const EncodingParams<Scalar>& p) {
  if (d.knowledge.size() != d.utterances.size() + 1)
    throw InputError("encode_knowledge: knowledge sources do not match utterances");
  ImplicitEncodings<Scalar> out;
  for (const auto& src : d.knowledge) {
    std::vector<Var<Scalar>> rows;
    for (const auto& rel : src) {
      Var<Scalar> h = transformer_encode(tape, p.knowledge, embed(tape, p.embedding, rel));
      rows.push_back(slice_rows(h, 0, 1));  // [CLS] position
    }
    out.sources.push_back(concat_rows(std::span<const Var<Scalar>>(rows)));
  }
  out.combined = concat_rows({out.sources.front(), out.sources.back()});
  out.refined = transformer_encode(tape, p.knowledge_refine, out.combined);
  return out;
}

template <typename Scalar>
ExplicitEncodings<Scalar> encode_explicit(Tape<Scalar>& tape, const EncodedDialogue& d,
                                          const EncodingParams<Scalar>& p) {
  ExplicitEncodings<Scalar> out;
  auto utt = encode_utterances(tape, d, p);
  out.utterances = std::move(utt.utterances);
  out.context = utt.context;
  out.situation = encode_situation(tape, d, p);
  for (const auto& u : d.utterances) out.utterance_words.push_back(word_vectors(tape, p.embedding, u));
  out.situation_words = word_vectors(tape, p.embedding, d.situation);
  return out;
}

}  // namespace iamm
