#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "iamm/association.hpp"
#include "iamm/grad_check.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace iamm;
using Mat = Matrix<double>;
using namespace iamm::testing;

namespace {

}  // namespace

TEST(AssociationConfig, DefaultsSatisfyWidthConstraint) {
  AssociationConfig cfg;
  EXPECT_EQ(cfg.associated * cfg.head_size, 300);
  EXPECT_EQ(cfg.block_rows(), 20);
  EXPECT_EQ(cfg.block_width(), 300);
  EXPECT_NO_THROW(cfg.validate(300));
  EXPECT_THROW(cfg.validate(64), InputError);
}

TEST(Association, MatricesAreSigmoidsOfProjections) {
  std::mt19937_64 rng(3);
  ParamStore<double> store;
  AssociationConfig cfg{1, 4, 2, 2};
  auto p = IAMParams<double>::create(store, "iam", 8, cfg, rng);
  Tape<double> tape;
  const Mat a = random_matrix(3, 8, rng), b = random_matrix(5, 8, rng);
  auto m = association_matrices(tape, tape.constant(a), tape.constant(b), p);
  const Mat& wq = p.query[0]->value;
  const Mat& wk = p.key[0]->value;
  ASSERT_EQ(m.s2t[0].rows(), 3);
  ASSERT_EQ(m.s2t[0].cols(), 5);
  ASSERT_EQ(m.t2s[0].rows(), 5);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 5; ++j) {
      EXPECT_NEAR(m.s2t[0].value()(i, j), sigmoid_d((a * wq).row(i).dot((b * wk).row(j))), 1e-12);
      EXPECT_NEAR(m.t2s[0].value()(j, i), sigmoid_d((b * wq).row(j).dot((a * wk).row(i))), 1e-12);
      EXPECT_GT(m.s2t[0].value()(i, j), 0.0);
      EXPECT_LT(m.s2t[0].value()(i, j), 1.0);
    }
}

TEST(Association, HandWorkedKeywordSelection) {
  // Column means of the opposing matrix are (0.5, 0.2, 0.8, 0.5).
  Tape<double> tape;
  Mat opp(2, 4);
  opp << 0.4, 0.1, 0.9, 0.6,
         0.6, 0.3, 0.7, 0.4;
  auto kw = first_order_keywords<double>({tape.constant(opp)}, 3);
  ASSERT_EQ(kw.top.size(), 1u);
  EXPECT_EQ(kw.top[0].indices, (std::vector<Index>{2, 0, 3}));
  EXPECT_NEAR(kw.top[0].scores[0], 0.8, 1e-15);
  EXPECT_NEAR(kw.top[0].scores[1], 0.5, 1e-15);
}

TEST(Association, SelectionMatchesBruteForceOn100Instances) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Instance in = random_instance(rng);
    ParamStore<double> store;
    auto p = IAMParams<double>::create(store, "iam", in.width, in.cfg, rng);
    Tape<double> tape;
    const auto res = associate_pair(tape, tape.constant(in.a), tape.constant(in.b), p);
    const auto ab = brute_direction(in.a, in.b, p);
    const auto ba = brute_direction(in.b, in.a, p);

    ASSERT_EQ(res.block.rows(), in.cfg.block_rows()) << "trial " << trial;
    ASSERT_EQ(res.block.cols(), in.cfg.block_width()) << "trial " << trial;
    Mat expect(res.block.rows(), res.block.cols());
    expect << ab.block, ba.block;
    EXPECT_LT((res.block.value() - expect).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;

    std::vector<bool> pad = ab.pad;
    pad.insert(pad.end(), ba.pad.begin(), ba.pad.end());
    EXPECT_EQ(res.pad, pad) << "trial " << trial;

    std::vector<std::pair<Index, Index>> got_ab, got_ba;
    for (const auto& r : res.records)
      (r.direction == Direction::kAtoB ? got_ab : got_ba).push_back({r.keyword, r.word});
    EXPECT_EQ(got_ab, ab.picks) << "trial " << trial;
    EXPECT_EQ(got_ba, ba.picks) << "trial " << trial;
  }
}

TEST(Association, ShortSentencesPadMissingRowsAndSlots) {
  std::mt19937_64 rng(5);
  ParamStore<double> store;
  AssociationConfig cfg{2, 2, 3, 4};
  auto p = IAMParams<double>::create(store, "iam", 8, cfg, rng);
  Tape<double> tape;
  // Two words in A, one in B: A contributes 2 keywords per head with one
  // associated word each; B contributes 1 keyword with 2 words.
  const auto res = associate_pair(tape, tape.constant(random_matrix(2, 8, rng)), tape.constant(random_matrix(1, 8, rng)), p);
  EXPECT_EQ(res.block.rows(), 12);
  EXPECT_EQ(res.valid_rows(), 2 * 2 + 2 * 1);
  for (Index r = 0; r < res.block.rows(); ++r) {
    if (res.pad[static_cast<std::size_t>(r)]) {
      EXPECT_TRUE(res.block.value().row(r).isZero()) << r;
    }
  }
  // A-to-B rows: only the first slot (one word in B) is filled.
  EXPECT_TRUE(res.block.value().block(0, 2, 1, 6).isZero());
  EXPECT_FALSE(res.block.value().block(0, 0, 1, 2).isZero());
}

TEST(Association, EmptySentenceThrows) {
  std::mt19937_64 rng(5);
  ParamStore<double> store;
  auto p = IAMParams<double>::create(store, "iam", 8, AssociationConfig{2, 4, 2, 2}, rng);
  Tape<double> tape;
  EXPECT_THROW(associate_pair(tape, tape.constant(Mat(0, 8)), tape.constant(random_matrix(2, 8, rng)), p), InputError);
  EXPECT_THROW(associate_pair(tape, tape.constant(random_matrix(2, 6, rng)), tape.constant(random_matrix(2, 6, rng)), p),
               InputError);
}

TEST(Association, GradientsThroughScalingAndProjections) {
  std::mt19937_64 rng(9);
  ParamStore<double> store;
  auto p = IAMParams<double>::create(store, "iam", 8, AssociationConfig{2, 4, 2, 2}, rng);
  auto& a = store.create("a", 4, 8);
  auto& b = store.create("b", 5, 8);
  a.value = random_matrix(4, 8, rng);
  b.value = random_matrix(5, 8, rng);
  const Mat w = random_matrix(8, 8, rng);
  auto loss = [&](Tape<double>& t) {
    auto res = associate_pair(t, t.param(a), t.param(b), p);
    return sum(cwise_product(res.block, t.constant(w)));
  };
  GradCheckOptions opt;
  opt.samples_per_param = 64;
  const auto report = grad_check<double>(loss, store, opt);
  EXPECT_TRUE(report.passed) << report.worst_param << "[" << report.worst_index << "] analytic " << report.worst_analytic
                             << " numeric " << report.worst_numeric;
}
