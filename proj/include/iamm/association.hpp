#pragma once

// Information association between two sentences: multi-head sigmoid
// association matrices, first-order keyword selection by mean received
// association, and second-order selection of the opposing words each keyword
// associates with most strongly. Selection indices are constants of the
// forward pass; gradients flow through the retained scores and the gathered
// word projections.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "iamm/autodiff.hpp"
#include "iamm/params.hpp"
#include "iamm/topk.hpp"

namespace iamm {

struct AssociationConfig {
  Index heads = 2;        // H
  Index head_size = 20;   // d_h
  Index keywords = 5;     // k_1
  Index associated = 15;  // k_2

  Index block_rows() const { return 2 * heads * keywords; }
  Index block_width() const { return associated * head_size; }

  void validate(Index width) const {
    if (heads < 1 || head_size < 1 || keywords < 1 || associated < 1)
      throw InputError("association: H, d_h, k_1 and k_2 must be >= 1");
    if (associated * head_size != width)
      throw InputError("association: k_2 * d_h must equal the hidden size " + std::to_string(width));
  }
};

template <typename Scalar>
struct IAMParams {
  AssociationConfig config;
  std::vector<Parameter<Scalar>*> query;  // per head, d x d_h
  std::vector<Parameter<Scalar>*> key;    // per head, d x d_h

  static IAMParams create(ParamStore<Scalar>& store, const std::string& name, Index width,
                          const AssociationConfig& config, std::mt19937_64& rng) {
    config.validate(width);
    IAMParams p;
    p.config = config;
    for (Index n = 0; n < config.heads; ++n) {
      p.query.push_back(&store.create(name + ".query" + std::to_string(n), width, config.head_size));
      init_xavier(*p.query.back(), rng);
      p.key.push_back(&store.create(name + ".key" + std::to_string(n), width, config.head_size));
      init_xavier(*p.key.back(), rng);
    }
    return p;
  }

  Index width() const { return query.front()->value.rows(); }
};

template <typename Scalar>
struct AssociationMatrices {
  std::vector<Var<Scalar>> s2t;       // per head, d_s x d_t
  std::vector<Var<Scalar>> t2s;       // per head, d_t x d_s
  std::vector<Var<Scalar>> values_s;  // per head key-side projections, d_s x d_h
  std::vector<Var<Scalar>> values_t;  // d_t x d_h
};

template <typename Scalar>
AssociationMatrices<Scalar> association_matrices(Tape<Scalar>& tape, const Var<Scalar>& src, const Var<Scalar>& tgt,
                                                 const IAMParams<Scalar>& p) {
  if (src.rows() == 0 || tgt.rows() == 0) throw InputError("association: empty sentence");
  if (src.cols() != p.width() || tgt.cols() != p.width()) throw InputError("association: width mismatch");
  AssociationMatrices<Scalar> m;
  for (std::size_t n = 0; n < p.query.size(); ++n) {
    Var<Scalar> wq = tape.param(*p.query[n]);
    Var<Scalar> wk = tape.param(*p.key[n]);
    Var<Scalar> qs = matmul(src, wq), ks = matmul(src, wk);
    Var<Scalar> qt = matmul(tgt, wq), kt = matmul(tgt, wk);
    m.s2t.push_back(sigmoid(matmul_nt(qs, kt)));
    m.t2s.push_back(sigmoid(matmul_nt(qt, ks)));
    m.values_s.push_back(ks);
    m.values_t.push_back(kt);
  }
  return m;
}

template <typename Scalar>
struct KeywordSelection {
  std::vector<Var<Scalar>> mean_scores;  // per head, 1 x d_this
  std::vector<TopK<Scalar>> top;         // per head, at most k_1 entries
};

// `opposing[n]` is (d_other x d_this): row j holds how strongly opposing word
// j associates with each word of this sentence.
template <typename Scalar>
KeywordSelection<Scalar> first_order_keywords(const std::vector<Var<Scalar>>& opposing, Index k_1) {
  KeywordSelection<Scalar> out;
  for (const auto& a : opposing) {
    Var<Scalar> m = mean_rows(a);
    out.top.push_back(topk(row_span(m.value(), 0), k_1));
    out.mean_scores.push_back(m);
  }
  return out;
}

template <typename Scalar>
struct SecondOrderResult {
  Var<Scalar> block;                                 // (H * k_1) x (k_2 * d_h), head-major rows
  std::vector<bool> pad;                             // true for zero rows without a keyword
  std::vector<std::vector<TopK<Scalar>>> selections;  // [head][keyword rank]
};

// `forward[n]` is (d_this x d_other); `values_other[n]` is (d_other x d_h).
template <typename Scalar>
SecondOrderResult<Scalar> second_order_select(const std::vector<Var<Scalar>>& forward,
                                              const std::vector<Var<Scalar>>& values_other,
                                              const KeywordSelection<Scalar>& keywords, Index k_1, Index k_2) {
  SecondOrderResult<Scalar> out;
  std::vector<Var<Scalar>> blocks;
  for (std::size_t n = 0; n < forward.size(); ++n) {
    const auto& kw = keywords.top[n];
    std::vector<std::vector<Index>> chosen;
    std::vector<TopK<Scalar>> sel;
    for (Index i : kw.indices) {
      sel.push_back(topk(row_span(forward[n].value(), i), k_2));
      chosen.push_back(sel.back().indices);
    }
    blocks.push_back(weighted_gather(forward[n], keywords.mean_scores[n], values_other[n], kw.indices,
                                     std::move(chosen), k_1, k_2));
    for (Index r = 0; r < k_1; ++r) out.pad.push_back(r >= static_cast<Index>(kw.indices.size()));
    out.selections.push_back(std::move(sel));
  }
  out.block = concat_rows(std::span<const Var<Scalar>>(blocks));
  return out;
}

enum class Direction {
  kAtoB,  // keywords in sentence A, associated words in B
  kBtoA,
};

template <typename Scalar>
struct SelectionRecord {
  Direction direction;
  Index head;
  Index keyword;        // row of the keyword sentence
  Scalar keyword_score;  // first-order score
  Index word;           // row of the associated-word sentence
  Scalar word_score;    // second-order score
};

template <typename Scalar>
struct AssociationResult {
  Var<Scalar> block;  // E_st: (2 H k_1) x (k_2 d_h)
  std::vector<bool> pad;
  std::vector<SelectionRecord<Scalar>> records;

  Index valid_rows() const { return static_cast<Index>(std::count(pad.begin(), pad.end(), false)); }
};

template <typename Scalar>
AssociationResult<Scalar> associate_pair(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b,
                                         const IAMParams<Scalar>& p) {
  const auto& cfg = p.config;
  const auto m = association_matrices(tape, a, b, p);
  const auto kw_a = first_order_keywords(m.t2s, cfg.keywords);
  const auto kw_b = first_order_keywords(m.s2t, cfg.keywords);
  const auto words_b = second_order_select(m.s2t, m.values_t, kw_a, cfg.keywords, cfg.associated);
  const auto words_a = second_order_select(m.t2s, m.values_s, kw_b, cfg.keywords, cfg.associated);

  AssociationResult<Scalar> out;
  out.block = concat_rows({words_b.block, words_a.block});
  out.pad = words_b.pad;
  out.pad.insert(out.pad.end(), words_a.pad.begin(), words_a.pad.end());
  auto record = [&](Direction dir, const KeywordSelection<Scalar>& kw, const SecondOrderResult<Scalar>& so) {
    for (std::size_t n = 0; n < so.selections.size(); ++n) {
      for (std::size_t r = 0; r < so.selections[n].size(); ++r) {
        const auto& s = so.selections[n][r];
        for (std::size_t k = 0; k < s.indices.size(); ++k) {
          out.records.push_back({dir, static_cast<Index>(n), kw.top[n].indices[r], kw.top[n].scores[r], s.indices[k],
                                 s.scores[k]});
        }
      }
    }
  };
  record(Direction::kAtoB, kw_a, words_b);
  record(Direction::kBtoA, kw_b, words_a);
  return out;
}

}  // namespace iamm
