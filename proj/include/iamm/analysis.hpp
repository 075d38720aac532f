#pragma once

// Associated-word statistics: per-token selection counts and weights, IDF
// and emotion-intensity curves over the top-k ranked words, plot CSV I/O.

#include <algorithm>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "iamm/corpus.hpp"

namespace iamm {

struct AssociatedWordRecord {
  std::string token;
  std::size_t count = 0;  // selection events
  double weight = 0.0;    // summed selection scores
  std::vector<std::string> dialogues;  // one entry per event
};

class AssociatedWordCollector {
 public:
  void add(const std::string& token, double score, const std::string& dialogue_id);
  // Records ordered by token.
  std::vector<AssociatedWordRecord> records() const;
  std::size_t events() const { return events_; }

 private:
  std::map<std::string, AssociatedWordRecord> by_token_;
  std::size_t events_ = 0;
};

// Ranked views. By count: count desc, weight desc, token asc. By weight:
// weight desc, count desc, token asc.
std::vector<AssociatedWordRecord> rank_by_count(std::vector<AssociatedWordRecord> records);
std::vector<AssociatedWordRecord> rank_by_weight(std::vector<AssociatedWordRecord> records);

// Document = one dialogue (situation, utterances and response).
std::vector<Tokens> dialogue_documents(const std::vector<Dialogue>& corpus);

// idf(t) = ln(N / (1 + df(t))).
class IdfTable {
 public:
  explicit IdfTable(const std::vector<Tokens>& documents);
  double idf(const std::string& token) const;
  std::size_t documents() const { return n_; }
  std::size_t document_frequency(const std::string& token) const;
  // Mean idf over the distinct token types of the corpus.
  double corpus_mean() const;
  const std::unordered_map<std::string, std::size_t>& frequencies() const { return df_; }

 private:
  std::size_t n_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

struct IntensityLexicon {
  std::unordered_map<std::string, double> values;
  double default_intensity = 0.0;

  double intensity(const std::string& token) const;
};

// CSV with header "token,intensity"; intensities must lie in [0, 1].
IntensityLexicon read_lexicon(std::istream& in);
IntensityLexicon load_lexicon(const std::string& path);

struct CurvePoint {
  std::size_t k = 0;
  double count_ranked = 0.0;
  double weight_ranked = 0.0;
  double corpus_mean = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

using Curve = std::vector<CurvePoint>;

// Cumulative mean of `value(token)` over the top-k words of each ranking; k
// larger than the record count averages over every record.
template <typename ValueFn>
Curve ranked_curve(const std::vector<AssociatedWordRecord>& records, ValueFn&& value, double corpus_mean,
                   const std::vector<std::size_t>& k_grid) {
  if (records.empty()) throw InputError("curves: no associated-word records");
  const auto by_count = rank_by_count(records);
  const auto by_weight = rank_by_weight(records);
  std::vector<double> count_prefix{0.0}, weight_prefix{0.0};
  for (std::size_t i = 0; i < records.size(); ++i) {
    count_prefix.push_back(count_prefix.back() + value(by_count[i].token));
    weight_prefix.push_back(weight_prefix.back() + value(by_weight[i].token));
  }
  Curve out;
  for (std::size_t k : k_grid) {
    if (k == 0) throw InputError("curves: k must be >= 1");
    const std::size_t n = std::min(k, records.size());
    out.push_back({k, count_prefix[n] / static_cast<double>(n), weight_prefix[n] / static_cast<double>(n), corpus_mean});
  }
  return out;
}

Curve idf_curves(const std::vector<AssociatedWordRecord>& records, const IdfTable& idf,
                 const std::vector<std::size_t>& k_grid);

// The baseline is the mean intensity over the distinct tokens of `documents`.
Curve intensity_curves(const std::vector<AssociatedWordRecord>& records, const IntensityLexicon& lexicon,
                       const std::vector<Tokens>& documents, const std::vector<std::size_t>& k_grid);

std::vector<std::size_t> default_k_grid(std::size_t max_k);

void write_plot_csv(const Curve& curve, std::ostream& out);
void emit_plot_csv(const Curve& curve, const std::string& path);
Curve read_plot_csv(std::istream& in);

}  // namespace iamm
