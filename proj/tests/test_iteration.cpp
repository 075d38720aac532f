#include <gtest/gtest.h>

#include <random>

#include "iamm/model.hpp"
#include "support.hpp"

using namespace iamm;
using iamm::testing::tiny_config;
using iamm::testing::toy_data;
using iamm::testing::truncate;

namespace {

std::vector<PairKind> kinds_of(const std::vector<MemoryBlock<double>>& blocks, Index utterance) {
  std::vector<PairKind> out;
  for (const auto& b : blocks)
    if (b.utterance == utterance) out.push_back(b.kind);
  return out;
}

}  // namespace

TEST(Iteration, PairCountIsOnePlusThreeTimesEarlierUtterances) {
  const RunConfig cfg = tiny_config();
  for (int m = 1; m <= 6; ++m) {
    const auto data = toy_data(1, m, m, static_cast<std::uint64_t>(m));
    IammModel<double> model(cfg, data.vocab.size());
    Tape<double> tape(false);
    const auto f = model.encode(tape, data.encoded[0]);
    const std::size_t pairs = 1 + 3 * static_cast<std::size_t>(m - 1);
    EXPECT_EQ(f.iteration.memory.explicit_blocks.size(), pairs) << "M=" << m;
    EXPECT_EQ(f.iteration.memory.implicit_blocks.size(), pairs) << "M=" << m;
    EXPECT_EQ(f.iteration.values.rows(), static_cast<Index>(2 * pairs) * 2 * cfg.H * cfg.k_1) << "M=" << m;
    EXPECT_EQ(f.iteration.pad.size(), static_cast<std::size_t>(f.iteration.values.rows()));
    const std::vector<PairKind> first{PairKind::kSituation};
    const std::vector<PairKind> later{PairKind::kSituation, PairKind::kHistory, PairKind::kMemory};
    for (Track t : {Track::kExplicit, Track::kImplicit}) {
      EXPECT_EQ(kinds_of(f.iteration.memory.blocks(t), 1), first);
      for (Index i = 2; i <= m; ++i) EXPECT_EQ(kinds_of(f.iteration.memory.blocks(t), i), later) << "U" << i;
    }
  }
}

TEST(Iteration, DefaultSizesGive280MemoryRowsForThreeUtterances) {
  RunConfig cfg;  // d=300, H=2, d_h=20, k_1=5, k_2=15
  const auto data = toy_data(1, 3, 3, 11);
  IammModel<float> model(cfg, data.vocab.size());
  Tape<float> tape(false);
  const auto f = model.encode(tape, data.encoded[0]);
  for (const auto& b : f.iteration.memory.explicit_blocks) {
    EXPECT_EQ(b.value.rows(), 20);
    EXPECT_EQ(b.value.cols(), 300);
  }
  EXPECT_EQ(f.iteration.values.rows(), 280);
  EXPECT_EQ(f.iteration.values.cols(), 300);
}

TEST(Iteration, MemoryOperandHoldsOnlyEarlierValidRows) {
  const auto data = toy_data(1, 4, 4, 5);
  IammModel<double> model(tiny_config(), data.vocab.size());
  Tape<double> tape(false);
  const auto f = model.encode(tape, data.encoded[0]);
  const auto& mem = f.iteration.memory;
  EXPECT_FALSE(mem.operand_before(Track::kExplicit, 1).has_value());
  for (Index i = 2; i <= 4; ++i) {
    Index expect_rows = 0;
    for (const auto& b : mem.explicit_blocks)
      if (b.utterance < i)
        for (bool p : b.pad) expect_rows += p ? 0 : 1;
    const auto op = mem.operand_before(Track::kExplicit, i);
    ASSERT_TRUE(op.has_value());
    EXPECT_EQ(op->value.rows(), expect_rows) << "U" << i;
    EXPECT_EQ(op->tokens, std::vector<Index>(static_cast<std::size_t>(expect_rows), kNoToken));
    // The memory block of U_i was built from exactly that operand.
    for (const auto& b : mem.explicit_blocks)
      if (b.utterance == i && b.kind == PairKind::kMemory) {
        EXPECT_EQ(static_cast<Index>(b.tokens_b.size()), expect_rows);
      }
  }
}

TEST(Iteration, ExplicitPairsCarryTokenIds) {
  const auto data = toy_data(1, 3, 3, 8);
  const auto& d = data.encoded[0];
  IammModel<double> model(tiny_config(), data.vocab.size());
  Tape<double> tape(false);
  const auto f = model.encode(tape, d);
  const auto& blocks = f.iteration.memory.explicit_blocks;
  EXPECT_EQ(blocks[0].tokens_a, d.utterances[0]);
  EXPECT_EQ(blocks[0].tokens_b, d.situation);
  // U_2 history is U_1.
  EXPECT_EQ(blocks[2].kind, PairKind::kHistory);
  EXPECT_EQ(blocks[2].tokens_b, d.utterances[0]);
}

TEST(Iteration, TruncationReproducesEarlierBlocksExactly) {
  const auto data = toy_data(50, 2, 5, 99);
  IammModel<double> model(tiny_config(), data.vocab.size());
  std::mt19937_64 rng(4);
  for (const auto& d : data.encoded) {
    std::uniform_int_distribution<std::size_t> cut(1, d.utterances.size());
    const std::size_t i = cut(rng);
    const auto shorter = truncate(d, i);
    Tape<double> t1(false), t2(false);
    const auto full = model.encode(t1, d);
    const auto part = model.encode(t2, shorter);
    for (Track t : {Track::kExplicit, Track::kImplicit}) {
      const auto& a = full.iteration.memory.blocks(t);
      const auto& b = part.iteration.memory.blocks(t);
      ASSERT_LE(b.size(), a.size());
      ASSERT_EQ(b.size(), 1 + 3 * (i - 1));
      for (std::size_t k = 0; k < b.size(); ++k) {
        EXPECT_EQ(a[k].utterance, b[k].utterance);
        EXPECT_EQ(a[k].pad, b[k].pad);
        EXPECT_TRUE(a[k].value.value() == b[k].value.value()) << d.id << " block " << k;
      }
    }
  }
}

TEST(Iteration, AblatedTracks) {
  const auto data = toy_data(1, 3, 3, 2);
  RunConfig cfg = tiny_config();
  cfg.no_implicit_association = true;
  {
    IammModel<double> model(cfg, data.vocab.size());
    Tape<double> tape(false);
    const auto f = model.encode(tape, data.encoded[0]);
    EXPECT_EQ(f.iteration.memory.explicit_blocks.size(), 7u);
    EXPECT_TRUE(f.iteration.memory.implicit_blocks.empty());
    EXPECT_EQ(f.iteration.values.rows(), 7 * 8);
  }
  cfg.no_explicit_association = true;
  {
    IammModel<double> model(cfg, data.vocab.size());
    Tape<double> tape(false);
    const auto f = model.encode(tape, data.encoded[0]);
    EXPECT_TRUE(f.iteration.memory.explicit_blocks.empty());
    EXPECT_EQ(f.iteration.values.rows(), 8);
    EXPECT_TRUE(f.iteration.values.value().isZero());
    EXPECT_EQ(f.memory.encoded.rows(), 8);
  }
}

TEST(MemoryEncoding, KeepsUnpaddedRowsOnly) {
  std::mt19937_64 rng(6);
  ParamStore<double> store;
  auto enc = EncoderParams<double>::create(store, "m", {1, 2, 8, 32}, rng);
  Tape<double> tape(false);
  Var<double> v = tape.constant(iamm::testing::random_matrix(5, 8, rng));
  const auto m = encode_memory(tape, enc, v, {false, true, false, true, false});
  EXPECT_EQ(m.encoded.rows(), 3);
  EXPECT_EQ(m.rows, (std::vector<Index>{0, 2, 4}));
  EXPECT_THROW(encode_memory(tape, enc, v, std::vector<bool>(5, true)), InputError);
}
