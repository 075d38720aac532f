#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "iamm/analysis.hpp"
#include "iamm/errors.hpp"
#include "iamm/metrics.hpp"
#include "oracles.hpp"

using namespace iamm;
using iamm::testing::brute_idf;
using iamm::testing::brute_idf_mean;
using iamm::testing::brute_top_k_mean;

namespace {

std::vector<Tokens> random_documents(std::mt19937_64& rng, std::size_t n, int types) {
  std::uniform_int_distribution<int> len(1, 12), tok(0, types - 1);
  std::vector<Tokens> docs(n);
  for (auto& d : docs) {
    const int l = len(rng);
    for (int i = 0; i < l; ++i) d.push_back("t" + std::to_string(tok(rng)));
  }
  return docs;
}

std::vector<AssociatedWordRecord> random_records(std::mt19937_64& rng, int types, int events) {
  std::uniform_int_distribution<int> tok(0, types - 1);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  AssociatedWordCollector c;
  for (int e = 0; e < events; ++e) c.add("t" + std::to_string(tok(rng)), score(rng), "d" + std::to_string(e % 17));
  return c.records();
}

}  // namespace

TEST(Distinct, HandCounts) {
  EXPECT_DOUBLE_EQ(distinct_n({{"a", "a", "b"}}, 1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(distinct_n({{"a", "b"}, {"a", "b"}}, 2), 0.5);
  EXPECT_DOUBLE_EQ(distinct_n({{"a"}, {"b", "c"}}, 2), 1.0);  // "a" has no bigram
  EXPECT_EQ(distinct_n({{"a"}}, 2), 0.0);
  EXPECT_THROW(distinct_n({{"a"}}, 0), InputError);
}

TEST(Distinct, StaysInUnitInterval) {
  std::mt19937_64 rng(1);
  std::vector<std::vector<std::string>> responses;
  for (int i = 0; i < 50; ++i) {
    const auto docs = random_documents(rng, 1, 6);
    responses.push_back(docs[0]);
    for (int n : {1, 2}) {
      const double v = distinct_n(responses, n);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Perplexity, UniformModelEqualsVocabularySize) {
  const double v = 50.0;
  PerplexityAccumulator acc;
  acc.add(7 * std::log(v), 7);
  acc.add(3 * std::log(v), 3);
  EXPECT_NEAR(acc.value(), v, 1e-12 * v);
}

TEST(Perplexity, PerfectModelIsOne) {
  PerplexityAccumulator acc;
  acc.add(0.0, 12);
  EXPECT_EQ(acc.value(), 1.0);
}

TEST(Perplexity, MergedBatchesEqualSinglePass) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> nll(0.0, 5.0);
  std::uniform_int_distribution<std::size_t> len(1, 20);
  PerplexityAccumulator one, a, b;
  double total = 0.0;
  std::size_t tokens = 0;
  for (int i = 0; i < 40; ++i) {
    const std::size_t n = len(rng);
    const double s = nll(rng) * static_cast<double>(n);
    one.add(s, n);
    (i % 2 ? a : b).add(s, n);
    total += s;
    tokens += n;
  }
  a.merge(b);
  EXPECT_NEAR(a.value(), one.value(), 1e-12 * one.value());
  EXPECT_NEAR(one.value(), std::exp(total / static_cast<double>(tokens)), 1e-12 * one.value());
  EXPECT_GE(one.value(), 1.0);
  EXPECT_THROW(PerplexityAccumulator{}.value(), InputError);
}

TEST(Accuracy, Fractions) {
  EXPECT_EQ(accuracy({1, 2, 3}, {1, 2, 3}), 1.0);
  EXPECT_DOUBLE_EQ(accuracy({1, 0, 3, 0}, {1, 2, 3, 4}), 0.5);
  EXPECT_THROW(accuracy({1}, {1, 2}), InputError);
  EXPECT_THROW(accuracy({}, {}), InputError);
}

TEST(Collector, AggregatesEvents) {
  AssociatedWordCollector c;
  c.add("guy", 0.5, "a");
  c.add("guy", 0.6, "b");
  c.add("guy", 0.7, "c");
  c.add("jerks", 0.9, "a");
  const auto r = c.records();
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].token, "guy");
  EXPECT_EQ(r[0].count, 3u);
  EXPECT_NEAR(r[0].weight, 1.8, 1e-12);
  EXPECT_EQ(r[0].dialogues, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(c.events(), 4u);
}

TEST(Ranking, CountAndWeightOrders) {
  std::vector<AssociatedWordRecord> r{{"a", 3, 0.9, {}}, {"b", 1, 2.0, {}}, {"c", 3, 1.0, {}}, {"d", 1, 2.0, {}}};
  const auto by_count = rank_by_count(r);
  const auto by_weight = rank_by_weight(r);
  std::vector<std::string> c, w;
  for (const auto& x : by_count) c.push_back(x.token);
  for (const auto& x : by_weight) w.push_back(x.token);
  EXPECT_EQ(c, (std::vector<std::string>{"c", "a", "b", "d"}));
  EXPECT_EQ(w, (std::vector<std::string>{"b", "d", "c", "a"}));
}

TEST(Idf, FourDocumentsTokenInOne) {
  const std::vector<Tokens> docs{{"x", "y"}, {"y"}, {"y", "z"}, {"y"}};
  const IdfTable idf(docs);
  EXPECT_DOUBLE_EQ(idf.idf("x"), std::log(2.0));
  EXPECT_EQ(idf.documents(), 4u);
  EXPECT_EQ(idf.document_frequency("y"), 4u);
  EXPECT_DOUBLE_EQ(idf.idf("y"), std::log(4.0 / 5.0));
  EXPECT_DOUBLE_EQ(idf.idf("unseen"), std::log(4.0));
}

TEST(Idf, MatchesBruteForceDocumentCounts) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto docs = random_documents(rng, 30, 25);
    const IdfTable idf(docs);
    for (int t = 0; t < 25; ++t) {
      const std::string tok = "t" + std::to_string(t);
      EXPECT_NEAR(idf.idf(tok), brute_idf(docs, tok), 1e-12);
    }
    EXPECT_NEAR(idf.corpus_mean(), brute_idf_mean(docs), 1e-12);
  }
}

TEST(Idf, DialogueDocumentsCoverSituationUtterancesAndResponse) {
  Dialogue d;
  d.situation = {"s"};
  d.utterances = {{Role::kSpeaker, {"u"}}};
  d.response = {"r"};
  const auto docs = dialogue_documents({d});
  ASSERT_EQ(docs.size(), 1u);
  for (const char* t : {"s", "u", "r"}) EXPECT_NE(std::find(docs[0].begin(), docs[0].end(), t), docs[0].end());
}

TEST(Curves, SingleRecord) {
  const std::vector<Tokens> docs{{"a"}, {"b"}, {"a", "c"}};
  const IdfTable idf(docs);
  const auto curve = idf_curves({{"c", 1, 0.4, {"x"}}}, idf, {1, 5});
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_DOUBLE_EQ(curve[0].count_ranked, idf.idf("c"));
  EXPECT_DOUBLE_EQ(curve[0].weight_ranked, idf.idf("c"));
  EXPECT_DOUBLE_EQ(curve[1].count_ranked, idf.idf("c"));
  EXPECT_DOUBLE_EQ(curve[0].corpus_mean, idf.corpus_mean());
}

TEST(Curves, EmptyRecordsAndZeroKThrow) {
  const IdfTable idf({{"a"}});
  EXPECT_THROW(idf_curves({}, idf, {1}), InputError);
  EXPECT_THROW(idf_curves({{"a", 1, 1.0, {}}}, idf, {0}), InputError);
}

TEST(Curves, MatchBruteForceAtRandomK) {
  std::mt19937_64 rng(4);
  const auto docs = random_documents(rng, 60, 40);
  const auto records = random_records(rng, 40, 300);
  const IdfTable idf(docs);
  IntensityLexicon lex;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 40; t += 2) lex.values["t" + std::to_string(t)] = u(rng);
  lex.default_intensity = 0.1;

  std::uniform_int_distribution<std::size_t> pick(1, records.size() + 5);
  std::vector<std::size_t> grid;
  for (int i = 0; i < 20; ++i) grid.push_back(pick(rng));
  const auto ic = idf_curves(records, idf, grid);
  const auto nc = intensity_curves(records, lex, docs, grid);
  auto idf_of = [&](const std::string& t) { return brute_idf(docs, t); };
  auto int_of = [&](const std::string& t) {
    auto it = lex.values.find(t);
    return it == lex.values.end() ? lex.default_intensity : it->second;
  };
  std::vector<std::string> types;
  for (const auto& d : docs)
    for (const auto& t : d)
      if (std::find(types.begin(), types.end(), t) == types.end()) types.push_back(t);
  double mean_int = 0.0;
  for (const auto& t : types) mean_int += int_of(t);
  mean_int /= static_cast<double>(types.size());

  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(ic[i].k, grid[i]);
    EXPECT_NEAR(ic[i].count_ranked, brute_top_k_mean(records, false, grid[i], idf_of), 1e-9);
    EXPECT_NEAR(ic[i].weight_ranked, brute_top_k_mean(records, true, grid[i], idf_of), 1e-9);
    EXPECT_NEAR(ic[i].corpus_mean, brute_idf_mean(docs), 1e-9);
    EXPECT_NEAR(nc[i].count_ranked, brute_top_k_mean(records, false, grid[i], int_of), 1e-9);
    EXPECT_NEAR(nc[i].weight_ranked, brute_top_k_mean(records, true, grid[i], int_of), 1e-9);
    EXPECT_NEAR(nc[i].corpus_mean, mean_int, 1e-9);
  }
}

TEST(PlotCsv, HeaderRowsAndRoundTrip) {
  std::mt19937_64 rng(5);
  const auto docs = random_documents(rng, 20, 15);
  const auto records = random_records(rng, 15, 80);
  const auto grid = default_k_grid(12);
  const auto curve = idf_curves(records, IdfTable(docs), grid);
  std::ostringstream out;
  write_plot_csv(curve, out);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "k,count_ranked_value,weight_ranked_value,corpus_mean");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), static_cast<long>(grid.size()) + 1);
  std::istringstream in(text);
  const auto back = read_plot_csv(in);
  ASSERT_EQ(back.size(), curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    EXPECT_EQ(back[i].k, curve[i].k);
    EXPECT_NEAR(back[i].count_ranked, curve[i].count_ranked, 1e-9);
    EXPECT_EQ(back[i], curve[i]);  // %.17g is lossless
  }
}

TEST(PlotCsv, UnwritablePathAndBadInput) {
  EXPECT_THROW(emit_plot_csv({{1, 0.0, 0.0, 0.0}}, "/nonexistent-dir/plot.csv"), IoError);
  std::istringstream bad_header("k,a,b\n");
  EXPECT_THROW(read_plot_csv(bad_header), ParseError);
  std::istringstream bad_row("k,count_ranked_value,weight_ranked_value,corpus_mean\n1,2,x,4\n");
  EXPECT_THROW(read_plot_csv(bad_row), ParseError);
}

TEST(Lexicon, ParsingAndValidation) {
  std::istringstream good("token,intensity\njoy,0.6\nrage,1\n");
  const auto lex = read_lexicon(good);
  EXPECT_DOUBLE_EQ(lex.intensity("joy"), 0.6);
  EXPECT_DOUBLE_EQ(lex.intensity("rage"), 1.0);
  EXPECT_DOUBLE_EQ(lex.intensity("table"), lex.default_intensity);
  std::istringstream no_header("joy,0.6\n");
  EXPECT_THROW(read_lexicon(no_header), ParseError);
  std::istringstream out_of_range("token,intensity\njoy,1.5\n");
  EXPECT_THROW(read_lexicon(out_of_range), SchemaError);
  std::istringstream bad_number("token,intensity\njoy,lots\n");
  EXPECT_THROW(read_lexicon(bad_number), ParseError);
}

TEST(Lexicon, BundledListLoads) {
  const auto path = std::filesystem::path(IAMM_SOURCE_DIR) / "data" / "intensity_lexicon.csv";
  const auto lex = load_lexicon(path.string());
  EXPECT_GE(lex.values.size(), 50u);
  for (const auto& [t, v] : lex.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}
