#pragma once

// Fixtures shared by the test binaries.

#include <random>
#include <vector>

#include "iamm/config.hpp"
#include "iamm/corpus.hpp"

namespace iamm::testing {

template <typename Scalar = double>
Matrix<Scalar> random_matrix(Index r, Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix<Scalar> m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(n(rng));
  return m;
}

// d=8, H=2, d_h=4, k_1=2, k_2=2, k_3=2.
inline RunConfig tiny_config() {
  RunConfig c;
  c.d = 8;
  c.H = 2;
  c.d_h = 4;
  c.k_1 = 2;
  c.k_2 = 2;
  c.k_3 = 2;
  c.precision = "double";
  c.batch_size = 4;
  return c;
}

struct ToyData {
  std::vector<Dialogue> dialogues;
  KnowledgeMap knowledge;
  Vocab vocab;
  std::vector<EncodedDialogue> encoded;
};

inline ToyData toy_data(int dialogues, int min_utterances, int max_utterances, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_dialogues = dialogues;
  spec.min_utterances = min_utterances;
  spec.max_utterances = max_utterances;
  spec.vocab_size = 20;
  spec.seed = seed;
  auto syn = generate_synthetic(spec);
  ToyData t;
  t.dialogues = std::move(syn.dialogues);
  t.knowledge = std::move(syn.knowledge);
  t.vocab = build_vocab(t.dialogues, t.knowledge, 1);
  t.encoded = encode_corpus(t.dialogues, t.knowledge, t.vocab);
  return t;
}

// The dialogue cut after `utterances` turns, knowledge included.
inline EncodedDialogue truncate(const EncodedDialogue& d, std::size_t utterances) {
  EncodedDialogue t = d;
  t.utterances.resize(utterances);
  t.roles.resize(utterances);
  t.knowledge.resize(utterances + 1);
  return t;
}

}  // namespace iamm::testing
