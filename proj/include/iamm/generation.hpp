#pragma once

// Response generation: associated-word selection over the encoded memory,
// two decoders fused by a learned gate, and a copy-generation output head
// over the dialogue context tokens.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "iamm/corpus.hpp"
#include "iamm/layers.hpp"
#include "iamm/topk.hpp"

namespace iamm {

template <typename Scalar>
struct SelectorParams {
  Parameter<Scalar>* scorer = nullptr;  // w_v, d x 1
  Index count = 5;                      // k_3

  static SelectorParams create(ParamStore<Scalar>& store, Index width, Index k_3, std::mt19937_64& rng) {
    if (k_3 < 1) throw InputError("selector: k_3 must be >= 1");
    SelectorParams p;
    p.scorer = &store.create("selector.scorer", width, 1);
    init_xavier(*p.scorer, rng);
    p.count = k_3;
    return p;
  }
};

template <typename Scalar>
struct WordSelection {
  Var<Scalar> selected;  // ~H_m, min(k_3, L_m) x d
  TopK<Scalar> top;      // scores and row indices into H_m
};

template <typename Scalar>
WordSelection<Scalar> select_words(Tape<Scalar>& tape, const Var<Scalar>& memory, const SelectorParams<Scalar>& p) {
  if (memory.rows() == 0) throw InputError("select_words: empty memory");
  Var<Scalar> scores = sigmoid(matmul(memory, tape.param(*p.scorer)));  // L_m x 1
  WordSelection<Scalar> out;
  const auto& s = scores.value();
  out.top = topk(std::span<const Scalar>(s.data(), static_cast<std::size_t>(s.rows())), p.count);
  out.selected = scale_rows(gather_rows(memory, out.top.indices), gather_rows(scores, out.top.indices));
  return out;
}

template <typename Scalar>
struct GenerationParams {
  DecoderParams<Scalar> context_decoder;  // Dec_c
  DecoderParams<Scalar> memory_decoder;   // Dec_a
  Parameter<Scalar>* gate = nullptr;      // w, 2d x 1
  Linear<Scalar> vocab;                   // d -> |V|
  Linear<Scalar> generate;                // p_gen over [O, context vector, prefix embedding]
  SelectorParams<Scalar> selector;

  static GenerationParams create(ParamStore<Scalar>& store, Index vocab_size, const TransformerShape& shape, Index k_3,
                                 std::mt19937_64& rng) {
    GenerationParams p;
    p.context_decoder = DecoderParams<Scalar>::create(store, "dec_context", shape, rng);
    p.memory_decoder = DecoderParams<Scalar>::create(store, "dec_memory", shape, rng);
    p.gate = &store.create("gate", 2 * shape.hidden, 1);
    init_xavier(*p.gate, rng);
    p.vocab = Linear<Scalar>::create(store, "vocab", shape.hidden, vocab_size, rng);
    p.generate = Linear<Scalar>::create(store, "p_gen", 3 * shape.hidden, 1, rng);
    p.selector = SelectorParams<Scalar>::create(store, shape.hidden, k_3, rng);
    return p;
  }
};

template <typename Scalar>
struct FusedDecode {
  Var<Scalar> context_out;    // O_c
  Var<Scalar> memory_out;     // O_m, invalid when no selected words are given
  Var<Scalar> gate;           // g, L_t x 1
  Var<Scalar> fused;          // O
  Var<Scalar> cross_weights;  // Dec_c final-layer attention over H_c rows
};

// Without `selected` (word selector ablated) O is O_c alone.
template <typename Scalar>
FusedDecode<Scalar> decode_fuse(Tape<Scalar>& tape, const GenerationParams<Scalar>& p, const Var<Scalar>& prefix,
                                const Var<Scalar>& context, const Var<Scalar>* selected) {
  FusedDecode<Scalar> out;
  auto dc = transformer_decode(tape, p.context_decoder, prefix, context);
  out.context_out = dc.out;
  out.cross_weights = dc.cross_weights;
  if (!selected) {
    out.fused = dc.out;
    return out;
  }
  out.memory_out = transformer_decode(tape, p.memory_decoder, prefix, *selected).out;
  out.gate = sigmoid(matmul(concat_cols({out.context_out, out.memory_out}), tape.param(*p.gate)));
  out.fused = scale_rows(out.context_out, out.gate) + scale_rows(out.memory_out, affine(out.gate, Scalar(-1), Scalar(1)));
  return out;
}

template <typename Scalar>
struct OutputDistribution {
  Var<Scalar> probs;           // L_t x |V|
  Var<Scalar> generate;        // p_gen, L_t x 1
  Var<Scalar> vocab_probs;     // softmax(W_vocab O)
};

// Copy targets outside the vocabulary are routed to [UNK].
template <typename Scalar>
OutputDistribution<Scalar> output_distribution(Tape<Scalar>& tape, const GenerationParams<Scalar>& p,
                                               const FusedDecode<Scalar>& dec, const Var<Scalar>& context,
                                               const Var<Scalar>& prefix, const std::vector<Index>& source_ids) {
  if (static_cast<Index>(source_ids.size()) != dec.cross_weights.cols())
    throw InputError("output_distribution: source ids do not match context rows");
  const Index v = p.vocab.out_features();
  std::vector<Index> routed(source_ids);
  for (auto& id : routed)
    if (id < 0 || id >= v) id = Vocab::kUnk;
  OutputDistribution<Scalar> out;
  out.vocab_probs = softmax_rows(p.vocab(tape, dec.fused));
  Var<Scalar> context_vector = matmul(dec.cross_weights, context);
  out.generate = sigmoid(p.generate(tape, concat_cols({dec.fused, context_vector, prefix})));
  Var<Scalar> copy = scatter_cols(dec.cross_weights, std::move(routed), v);
  out.probs = scale_rows(out.vocab_probs, out.generate) + scale_rows(copy, affine(out.generate, Scalar(-1), Scalar(1)));
  return out;
}

// [BOS] + response, the decoder input for teacher forcing.
inline std::vector<Index> decoder_input(const std::vector<Index>& response) {
  std::vector<Index> ids{Vocab::kBos};
  ids.insert(ids.end(), response.begin(), response.end());
  return ids;
}

// response + [EOS], the targets aligned with decoder_input rows.
inline std::vector<Index> decoder_target(const std::vector<Index>& response) {
  std::vector<Index> ids(response);
  ids.push_back(Vocab::kEos);
  return ids;
}

// -sum_t log P(y_t).
template <typename Scalar>
Var<Scalar> generation_loss(const Var<Scalar>& probs, const std::vector<Index>& targets) {
  if (static_cast<Index>(targets.size()) != probs.rows()) throw InputError("generation_loss: target length mismatch");
  Var<Scalar> total;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] < 0 || targets[t] >= probs.cols()) throw InputError("generation_loss: target id out of range");
    Var<Scalar> lp = log(element(probs, static_cast<Index>(t), targets[t]));
    total = total.valid() ? total + lp : lp;
  }
  return Scalar(-1) * total;
}

// Everything the decoder needs from the encoder side of one dialogue.
template <typename Scalar>
struct DecoderState {
  Var<Scalar> context;           // H_c
  std::optional<Var<Scalar>> selected;  // ~H_m
  std::vector<Index> source_ids;  // context token ids, aligned with H_c rows
};

template <typename Scalar>
OutputDistribution<Scalar> decode_step(Tape<Scalar>& tape, const GenerationParams<Scalar>& p,
                                       const EmbeddingTable<Scalar>& table, const DecoderState<Scalar>& state,
                                       const std::vector<Index>& prefix_ids) {
  Var<Scalar> prefix = embed(tape, table, prefix_ids);
  auto dec = decode_fuse(tape, p, prefix, state.context, state.selected ? &*state.selected : nullptr);
  return output_distribution(tape, p, dec, state.context, prefix, state.source_ids);
}

// Repeated argmax from [BOS] until [EOS] or max_len tokens; the returned
// sequence excludes [BOS] and includes a final [EOS] when one was emitted.
template <typename Scalar>
std::vector<Index> greedy_decode(Tape<Scalar>& tape, const GenerationParams<Scalar>& p,
                                 const EmbeddingTable<Scalar>& table, const DecoderState<Scalar>& state,
                                 Index max_len) {
  std::vector<Index> prefix{Vocab::kBos};
  std::vector<Index> out;
  for (Index t = 0; t < max_len; ++t) {
    auto dist = decode_step(tape, p, table, state, prefix);
    const auto& probs = dist.probs.value();
    const Index next = topk(row_span(probs, probs.rows() - 1), 1).indices.front();
    out.push_back(next);
    if (next == Vocab::kEos) break;
    prefix.push_back(next);
  }
  return out;
}

}  // namespace iamm
