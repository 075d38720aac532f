#pragma once

// Automatic metrics: perplexity, emotion accuracy and distinct-n.

#include <cstddef>
#include <string>
#include <vector>

namespace iamm {

// Token-weighted negative log-likelihood accumulator. Partial accumulators
// merge exactly, so split computations match a single pass.
class PerplexityAccumulator {
 public:
  void add(double nll_sum, std::size_t tokens);
  void merge(const PerplexityAccumulator& other);
  double nll() const { return nll_; }
  std::size_t tokens() const { return tokens_; }
  double mean_nll() const;
  double value() const;  // exp(mean_nll)

 private:
  double nll_ = 0.0;
  std::size_t tokens_ = 0;
};

double accuracy(const std::vector<int>& predicted, const std::vector<int>& gold);

// Unique n-grams over total n-grams across all responses; responses shorter
// than n contribute nothing. Returns 0 when there are no n-grams at all.
double distinct_n(const std::vector<std::vector<std::string>>& responses, int n);

}  // namespace iamm
