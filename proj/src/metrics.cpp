#include "iamm/metrics.hpp"

#include <cmath>
#include <set>

#include "iamm/errors.hpp"

namespace iamm {

void PerplexityAccumulator::add(double nll_sum, std::size_t tokens) {
  nll_ += nll_sum;
  tokens_ += tokens;
}

void PerplexityAccumulator::merge(const PerplexityAccumulator& other) { add(other.nll_, other.tokens_); }

double PerplexityAccumulator::mean_nll() const {
  if (tokens_ == 0) throw InputError("perplexity: no tokens");
  return nll_ / static_cast<double>(tokens_);
}

double PerplexityAccumulator::value() const { return std::exp(mean_nll()); }

double accuracy(const std::vector<int>& predicted, const std::vector<int>& gold) {
  if (predicted.size() != gold.size()) throw InputError("accuracy: length mismatch");
  if (gold.empty()) throw InputError("accuracy: empty split");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double distinct_n(const std::vector<std::vector<std::string>>& responses, int n) {
  if (n < 1) throw InputError("distinct_n: n must be >= 1");
  std::set<std::vector<std::string>> unique;
  std::size_t total = 0;
  for (const auto& r : responses) {
    if (r.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= r.size(); ++i) {
      unique.emplace(r.begin() + static_cast<std::ptrdiff_t>(i), r.begin() + static_cast<std::ptrdiff_t>(i + n));
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(unique.size()) / static_cast<double>(total);
}

}  // namespace iamm
