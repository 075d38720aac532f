#pragma once

// Embeddings and pre-norm transformer blocks built on the autodiff tape.

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "iamm/autodiff.hpp"
#include "iamm/params.hpp"
#include "iamm/types.hpp"

namespace iamm {

template <typename Scalar>
struct Linear {
  Parameter<Scalar>* weight = nullptr;  // in x out
  Parameter<Scalar>* bias = nullptr;    // 1 x out, optional

  static Linear create(ParamStore<Scalar>& store, const std::string& name, Index in, Index out, std::mt19937_64& rng,
                       bool with_bias = true) {
    Linear l;
    l.weight = &store.create(name + ".weight", in, out);
    init_xavier(*l.weight, rng);
    if (with_bias) l.bias = &store.create(name + ".bias", 1, out);
    return l;
  }

  Index in_features() const { return weight->value.rows(); }
  Index out_features() const { return weight->value.cols(); }

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
    if (x.cols() != in_features()) throw InputError("linear " + weight->name + ": input width mismatch");
    Var<Scalar> y = matmul(x, tape.param(*weight));
    return bias ? add_row(y, tape.param(*bias)) : y;
  }
};

template <typename Scalar>
struct LayerNorm {
  Parameter<Scalar>* gamma = nullptr;
  Parameter<Scalar>* beta = nullptr;

  static LayerNorm create(ParamStore<Scalar>& store, const std::string& name, Index width) {
    LayerNorm ln;
    ln.gamma = &store.create(name + ".gamma", 1, width);
    init_constant(*ln.gamma, Scalar(1));
    ln.beta = &store.create(name + ".beta", 1, width);
    return ln;
  }

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
    return layer_norm_rows(x, tape.param(*gamma), tape.param(*beta));
  }
};

// Additive attention mask: masked_logit() where the key is padded, or where
// the key lies after the query when `causal` is set.
template <typename Scalar>
Matrix<Scalar> attention_mask(Index queries, Index keys, const std::vector<bool>& key_padding, bool causal) {
  Matrix<Scalar> m = Matrix<Scalar>::Zero(queries, keys);
  for (Index q = 0; q < queries; ++q) {
    for (Index k = 0; k < keys; ++k) {
      const bool padded = !key_padding.empty() && key_padding[static_cast<std::size_t>(k)];
      if (padded || (causal && k > q)) m(q, k) = masked_logit<Scalar>();
    }
  }
  return m;
}

template <typename Scalar>
struct MultiHeadAttention {
  Linear<Scalar> query, key, value, output;
  Index heads = 1;

  static MultiHeadAttention create(ParamStore<Scalar>& store, const std::string& name, Index width, Index heads,
                                   std::mt19937_64& rng) {
    if (heads < 1 || width % heads != 0) throw InputError("attention: width must be divisible by head count");
    MultiHeadAttention a;
    a.query = Linear<Scalar>::create(store, name + ".query", width, width, rng);
    a.key = Linear<Scalar>::create(store, name + ".key", width, width, rng);
    a.value = Linear<Scalar>::create(store, name + ".value", width, width, rng);
    a.output = Linear<Scalar>::create(store, name + ".output", width, width, rng);
    a.heads = heads;
    return a;
  }

  struct Result {
    Var<Scalar> out;
    Var<Scalar> weights;  // head-averaged attention, queries x keys
  };

  Result operator()(Tape<Scalar>& tape, const Var<Scalar>& q_in, const Var<Scalar>& kv_in,
                    const Matrix<Scalar>& mask) const {
    const Index width = query.out_features();
    const Index dk = width / heads;
    const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(dk));
    Var<Scalar> q = query(tape, q_in);
    Var<Scalar> k = key(tape, kv_in);
    Var<Scalar> v = value(tape, kv_in);
    std::vector<Var<Scalar>> outs;
    Var<Scalar> weight_sum;
    for (Index h = 0; h < heads; ++h) {
      Var<Scalar> scores = inv_sqrt * matmul_nt(slice_cols(q, h * dk, dk), slice_cols(k, h * dk, dk));
      Var<Scalar> p = softmax_rows(scores, mask);
      outs.push_back(matmul(p, slice_cols(v, h * dk, dk)));
      weight_sum = weight_sum.valid() ? weight_sum + p : p;
    }
    Var<Scalar> merged = heads == 1 ? outs.front() : concat_cols(std::span<const Var<Scalar>>(outs));
    Var<Scalar> weights = heads == 1 ? weight_sum : affine(weight_sum, Scalar(1) / static_cast<Scalar>(heads), Scalar(0));
    return {output(tape, merged), weights};
  }
};

template <typename Scalar>
struct FeedForward {
  Linear<Scalar> inner, outer;

  static FeedForward create(ParamStore<Scalar>& store, const std::string& name, Index width, Index hidden,
                            std::mt19937_64& rng) {
    return {Linear<Scalar>::create(store, name + ".inner", width, hidden, rng),
            Linear<Scalar>::create(store, name + ".outer", hidden, width, rng)};
  }

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const { return outer(tape, relu(inner(tape, x))); }
};

struct TransformerShape {
  Index layers = 1;
  Index heads = 2;
  Index hidden = 300;
  Index ffn = 1200;
};

template <typename Scalar>
struct EncoderLayer {
  LayerNorm<Scalar> attn_norm, ffn_norm;
  MultiHeadAttention<Scalar> attn;
  FeedForward<Scalar> ffn;
};

template <typename Scalar>
struct EncoderParams {
  TransformerShape shape;
  std::vector<EncoderLayer<Scalar>> layers;
  LayerNorm<Scalar> final_norm;

  static EncoderParams create(ParamStore<Scalar>& store, const std::string& name, const TransformerShape& shape,
                              std::mt19937_64& rng) {
    if (shape.heads < 1 || shape.hidden % shape.heads != 0)
      throw InputError(name + ": hidden size must be divisible by head count");
    EncoderParams p;
    p.shape = shape;
    for (Index l = 0; l < shape.layers; ++l) {
      const std::string n = name + ".layer" + std::to_string(l);
      p.layers.push_back({LayerNorm<Scalar>::create(store, n + ".attn_norm", shape.hidden),
                          LayerNorm<Scalar>::create(store, n + ".ffn_norm", shape.hidden),
                          MultiHeadAttention<Scalar>::create(store, n + ".attn", shape.hidden, shape.heads, rng),
                          FeedForward<Scalar>::create(store, n + ".ffn", shape.hidden, shape.ffn, rng)});
    }
    p.final_norm = LayerNorm<Scalar>::create(store, name + ".final_norm", shape.hidden);
    return p;
  }
};

// Self-attention encoder. `pad_mask[t]` marks row t as padding: padded rows
// never act as keys, so they cannot influence unpadded outputs.
template <typename Scalar>
Var<Scalar> transformer_encode(Tape<Scalar>& tape, const EncoderParams<Scalar>& params, const Var<Scalar>& x,
                               const std::vector<bool>& pad_mask = {}) {
  if (x.cols() != params.shape.hidden) throw InputError("transformer_encode: input width mismatch");
  if (x.rows() == 0) throw InputError("transformer_encode: empty input");
  if (!pad_mask.empty() && static_cast<Index>(pad_mask.size()) != x.rows())
    throw InputError("transformer_encode: mask length mismatch");
  const Matrix<Scalar> mask = attention_mask<Scalar>(x.rows(), x.rows(), pad_mask, false);
  Var<Scalar> h = x;
  for (const auto& layer : params.layers) {
    Var<Scalar> n1 = layer.attn_norm(tape, h);
    h = h + layer.attn(tape, n1, n1, mask).out;
    h = h + layer.ffn(tape, layer.ffn_norm(tape, h));
  }
  return params.final_norm(tape, h);
}

template <typename Scalar>
struct DecoderLayer {
  LayerNorm<Scalar> self_norm, cross_norm, ffn_norm;
  MultiHeadAttention<Scalar> self_attn, cross_attn;
  FeedForward<Scalar> ffn;
};

template <typename Scalar>
struct DecoderParams {
  TransformerShape shape;
  std::vector<DecoderLayer<Scalar>> layers;
  LayerNorm<Scalar> final_norm;

  static DecoderParams create(ParamStore<Scalar>& store, const std::string& name, const TransformerShape& shape,
                              std::mt19937_64& rng) {
    if (shape.heads < 1 || shape.hidden % shape.heads != 0)
      throw InputError(name + ": hidden size must be divisible by head count");
    DecoderParams p;
    p.shape = shape;
    for (Index l = 0; l < shape.layers; ++l) {
      const std::string n = name + ".layer" + std::to_string(l);
      p.layers.push_back({LayerNorm<Scalar>::create(store, n + ".self_norm", shape.hidden),
                          LayerNorm<Scalar>::create(store, n + ".cross_norm", shape.hidden),
                          LayerNorm<Scalar>::create(store, n + ".ffn_norm", shape.hidden),
                          MultiHeadAttention<Scalar>::create(store, n + ".self_attn", shape.hidden, shape.heads, rng),
                          MultiHeadAttention<Scalar>::create(store, n + ".cross_attn", shape.hidden, shape.heads, rng),
                          FeedForward<Scalar>::create(store, n + ".ffn", shape.hidden, shape.ffn, rng)});
    }
    p.final_norm = LayerNorm<Scalar>::create(store, name + ".final_norm", shape.hidden);
    return p;
  }
};

template <typename Scalar>
struct DecodeResult {
  Var<Scalar> out;            // L_t x d
  Var<Scalar> cross_weights;  // L_t x memory rows, final layer, head-averaged
};

template <typename Scalar>
DecodeResult<Scalar> transformer_decode(Tape<Scalar>& tape, const DecoderParams<Scalar>& params,
                                        const Var<Scalar>& prefix, const Var<Scalar>& memory,
                                        const std::vector<bool>& memory_pad = {}) {
  if (memory.rows() == 0) throw InputError("transformer_decode: empty memory");
  if (prefix.rows() == 0) throw InputError("transformer_decode: empty prefix");
  if (prefix.cols() != params.shape.hidden || memory.cols() != params.shape.hidden)
    throw InputError("transformer_decode: width mismatch");
  const Matrix<Scalar> self_mask = attention_mask<Scalar>(prefix.rows(), prefix.rows(), {}, true);
  const Matrix<Scalar> cross_mask = attention_mask<Scalar>(prefix.rows(), memory.rows(), memory_pad, false);
  Var<Scalar> h = prefix;
  Var<Scalar> weights;
  for (const auto& layer : params.layers) {
    Var<Scalar> n1 = layer.self_norm(tape, h);
    h = h + layer.self_attn(tape, n1, n1, self_mask).out;
    auto cross = layer.cross_attn(tape, layer.cross_norm(tape, h), memory, cross_mask);
    h = h + cross.out;
    weights = cross.weights;
    h = h + layer.ffn(tape, layer.ffn_norm(tape, h));
  }
  return {params.final_norm(tape, h), weights};
}

// Fixed sinusoidal table: even columns sin, odd columns cos.
template <typename Scalar>
Matrix<Scalar> positional_encoding(Index length, Index width, Index offset = 0) {
  Matrix<Scalar> pe(length, width);
  for (Index t = 0; t < length; ++t) {
    const double pos = static_cast<double>(t + offset);
    for (Index i = 0; i < width; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      pe(t, i) = static_cast<Scalar>(i % 2 == 0 ? std::sin(pos / rate) : std::cos(pos / rate));
    }
  }
  return pe;
}

template <typename Scalar>
struct EmbeddingTable {
  Parameter<Scalar>* words = nullptr;  // vocab x d
  Parameter<Scalar>* roles = nullptr;  // 2 x d

  static EmbeddingTable create(ParamStore<Scalar>& store, const std::string& name, Index vocab, Index width,
                               std::mt19937_64& rng) {
    EmbeddingTable t;
    t.words = &store.create(name + ".words", vocab, width);
    init_normal(*t.words, rng, 1.0 / std::sqrt(static_cast<double>(width)));
    t.roles = &store.create(name + ".roles", 2, width);
    init_normal(*t.roles, rng, 1.0 / std::sqrt(static_cast<double>(width)));
    return t;
  }

  Index vocab_size() const { return words->value.rows(); }
  Index width() const { return words->value.cols(); }
};

// Word vectors of `ids` only (no positional or role term).
template <typename Scalar>
Var<Scalar> word_vectors(Tape<Scalar>& tape, const EmbeddingTable<Scalar>& table, const std::vector<Index>& ids) {
  for (Index id : ids)
    if (id < 0 || id >= table.vocab_size()) throw InputError("embed: token id " + std::to_string(id) + " out of range");
  return gather_rows(tape.param(*table.words), ids);
}

// Row t = word(ids[t]) + positional(t) [+ role(roles[t])].
template <typename Scalar>
Var<Scalar> embed(Tape<Scalar>& tape, const EmbeddingTable<Scalar>& table, const std::vector<Index>& ids,
                  const std::vector<Role>* roles = nullptr) {
  if (ids.empty()) throw InputError("embed: empty sequence");
  if (roles && roles->size() != ids.size()) throw InputError("embed: role sequence length mismatch");
  Var<Scalar> x = word_vectors(tape, table, ids);
  x = x + tape.constant(positional_encoding<Scalar>(static_cast<Index>(ids.size()), table.width()));
  if (roles) {
    std::vector<Index> rid;
    rid.reserve(roles->size());
    for (Role r : *roles) rid.push_back(static_cast<Index>(r));
    x = x + gather_rows(tape.param(*table.roles), rid);
  }
  return x;
}

}  // namespace iamm
