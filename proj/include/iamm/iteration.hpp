#pragma once

// Iterative association over the utterances of a dialogue. Utterance U_i is
// paired with the situation, with the earlier utterances and with the memory
// of earlier utterances, on an explicit (word embedding) track and an
// implicit (relation vector) track. Every pair result is appended to the
// memory of its track.

#include <optional>
#include <vector>

#include "iamm/association.hpp"
#include "iamm/corpus.hpp"
#include "iamm/encoding.hpp"

namespace iamm {

enum class Track { kExplicit, kImplicit };
enum class PairKind { kSituation, kHistory, kMemory };

inline constexpr Index kNoToken = -1;

template <typename Scalar>
struct Operand {
  Var<Scalar> value;
  std::vector<Index> tokens;  // token id per row, kNoToken for memory or relation rows
};

template <typename Scalar>
struct SentencePair {
  Track track;
  PairKind kind;
  Operand<Scalar> a;  // always the current utterance
  Operand<Scalar> b;
};

template <typename Scalar>
struct MemoryBlock {
  Track track;
  PairKind kind;
  Index utterance;  // 1-based
  Var<Scalar> value;
  std::vector<bool> pad;
  std::vector<SelectionRecord<Scalar>> records;
  std::vector<Index> tokens_a, tokens_b;
};

template <typename Scalar>
struct AssociativeMemory {
  std::vector<MemoryBlock<Scalar>> explicit_blocks;
  std::vector<MemoryBlock<Scalar>> implicit_blocks;

  std::vector<MemoryBlock<Scalar>>& blocks(Track t) { return t == Track::kExplicit ? explicit_blocks : implicit_blocks; }
  const std::vector<MemoryBlock<Scalar>>& blocks(Track t) const {
    return t == Track::kExplicit ? explicit_blocks : implicit_blocks;
  }

  // Unpadded rows of every block created for utterances before `utterance`.
  std::optional<Operand<Scalar>> operand_before(Track t, Index utterance) const {
    std::vector<Var<Scalar>> parts;
    for (const auto& b : blocks(t)) {
      if (b.utterance >= utterance) continue;
      std::vector<Index> rows;
      for (std::size_t r = 0; r < b.pad.size(); ++r)
        if (!b.pad[r]) rows.push_back(static_cast<Index>(r));
      if (!rows.empty()) parts.push_back(gather_rows(b.value, std::move(rows)));
    }
    if (parts.empty()) return std::nullopt;
    Operand<Scalar> op{concat_rows(std::span<const Var<Scalar>>(parts)), {}};
    op.tokens.assign(static_cast<std::size_t>(op.value.rows()), kNoToken);
    return op;
  }
};

template <typename Scalar>
struct DialogueEncodings {
  const EncodedDialogue* dialogue = nullptr;
  ExplicitEncodings<Scalar> explicit_enc;
  ImplicitEncodings<Scalar> implicit_enc;
};

struct IterationOptions {
  bool explicit_track = true;
  bool implicit_track = true;
};

// Pairs for utterance i (1-based). Pairs whose second operand would be empty
// are omitted, so U_1 only gets its situation pair on each track.
template <typename Scalar>
std::vector<SentencePair<Scalar>> build_pairs(Index i, const DialogueEncodings<Scalar>& enc,
                                              const AssociativeMemory<Scalar>& memory,
                                              const IterationOptions& opt = {}) {
  const auto& d = *enc.dialogue;
  const Index m = static_cast<Index>(d.utterances.size());
  if (i < 1 || i > m) throw InputError("build_pairs: utterance index out of range");
  const auto ui = static_cast<std::size_t>(i - 1);
  std::vector<SentencePair<Scalar>> out;
  auto no_tokens = [](Index rows) { return std::vector<Index>(static_cast<std::size_t>(rows), kNoToken); };

  if (opt.explicit_track) {
    const auto& ex = enc.explicit_enc;
    Operand<Scalar> cur{ex.utterance_words[ui], d.utterances[ui]};
    out.push_back({Track::kExplicit, PairKind::kSituation, cur, {ex.situation_words, d.situation}});
    if (i > 1) {
      std::vector<Var<Scalar>> hist(ex.utterance_words.begin(), ex.utterance_words.begin() + (i - 1));
      std::vector<Index> toks;
      for (std::size_t j = 0; j < ui; ++j) toks.insert(toks.end(), d.utterances[j].begin(), d.utterances[j].end());
      out.push_back({Track::kExplicit, PairKind::kHistory, cur,
                     {concat_rows(std::span<const Var<Scalar>>(hist)), std::move(toks)}});
    }
    if (auto mem = memory.operand_before(Track::kExplicit, i))
      out.push_back({Track::kExplicit, PairKind::kMemory, cur, std::move(*mem)});
  }
  if (opt.implicit_track) {
    const auto& im = enc.implicit_enc;
    Operand<Scalar> cur{im.sources[ui + 1], no_tokens(im.sources[ui + 1].rows())};
    out.push_back({Track::kImplicit, PairKind::kSituation, cur, {im.sources[0], no_tokens(im.sources[0].rows())}});
    if (i > 1) {
      std::vector<Var<Scalar>> hist(im.sources.begin() + 1, im.sources.begin() + i);
      Var<Scalar> h = concat_rows(std::span<const Var<Scalar>>(hist));
      out.push_back({Track::kImplicit, PairKind::kHistory, cur, {h, no_tokens(h.rows())}});
    }
    if (auto mem = memory.operand_before(Track::kImplicit, i))
      out.push_back({Track::kImplicit, PairKind::kMemory, cur, std::move(*mem)});
  }
  return out;
}

template <typename Scalar>
struct IterationResult {
  Var<Scalar> explicit_values;  // V_ek, invalid when the track is off
  Var<Scalar> implicit_values;  // V_ik
  Var<Scalar> values;           // V
  std::vector<bool> pad;        // per row of V
  AssociativeMemory<Scalar> memory;
};

template <typename Scalar>
IterationResult<Scalar> iterate_dialogue(Tape<Scalar>& tape, const DialogueEncodings<Scalar>& enc,
                                         const IAMParams<Scalar>& explicit_iam, const IAMParams<Scalar>& implicit_iam,
                                         const IterationOptions& opt = {}) {
  IterationResult<Scalar> out;
  const Index m = static_cast<Index>(enc.dialogue->utterances.size());
  for (Index i = 1; i <= m; ++i) {
    for (auto& pair : build_pairs(i, enc, out.memory, opt)) {
      const auto& iam = pair.track == Track::kExplicit ? explicit_iam : implicit_iam;
      auto res = associate_pair(tape, pair.a.value, pair.b.value, iam);
      out.memory.blocks(pair.track).push_back({pair.track, pair.kind, i, res.block, std::move(res.pad),
                                               std::move(res.records), std::move(pair.a.tokens),
                                               std::move(pair.b.tokens)});
    }
  }
  auto stack = [&](Track t, Var<Scalar>& dst) {
    const auto& blocks = out.memory.blocks(t);
    if (blocks.empty()) return;
    std::vector<Var<Scalar>> parts;
    for (const auto& b : blocks) parts.push_back(b.value);
    dst = concat_rows(std::span<const Var<Scalar>>(parts));
  };
  stack(Track::kExplicit, out.explicit_values);
  stack(Track::kImplicit, out.implicit_values);
  for (Track t : {Track::kExplicit, Track::kImplicit})
    for (const auto& b : out.memory.blocks(t)) out.pad.insert(out.pad.end(), b.pad.begin(), b.pad.end());

  if (out.explicit_values.valid() && out.implicit_values.valid()) {
    out.values = concat_rows({out.explicit_values, out.implicit_values});
  } else if (out.explicit_values.valid()) {
    out.values = out.explicit_values;
  } else if (out.implicit_values.valid()) {
    out.values = out.implicit_values;
  } else {
    // Both tracks ablated: a single all-zero block stands in for the memory.
    const auto& cfg = explicit_iam.config;
    out.values = tape.constant(Matrix<Scalar>::Zero(cfg.block_rows(), explicit_iam.width()));
    out.pad.assign(static_cast<std::size_t>(cfg.block_rows()), false);
  }
  return out;
}

template <typename Scalar>
struct MemoryEncoding {
  Var<Scalar> encoded;     // H_m, L_m x d (unpadded rows only)
  std::vector<Index> rows;  // row of V behind each row of H_m
};

template <typename Scalar>
MemoryEncoding<Scalar> encode_memory(Tape<Scalar>& tape, const EncoderParams<Scalar>& enc, const Var<Scalar>& values,
                                     const std::vector<bool>& pad) {
  if (values.rows() == 0) throw InputError("encode_memory: empty memory");
  Var<Scalar> h = transformer_encode(tape, enc, values, pad);
  MemoryEncoding<Scalar> out;
  for (std::size_t r = 0; r < pad.size(); ++r)
    if (!pad[r]) out.rows.push_back(static_cast<Index>(r));
  if (out.rows.empty()) throw InputError("encode_memory: every memory row is padding");
  out.encoded = gather_rows(h, out.rows);
  return out;
}

}  // namespace iamm
