#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "iamm/autodiff.hpp"

namespace iamm {

template <typename Scalar>
struct TopK {
  std::vector<Scalar> scores;
  std::vector<Index> indices;
};

// Largest min(k, n) entries in descending order; equal values keep the lower
// index first. An empty input gives an empty result.
template <typename Scalar>
TopK<Scalar> topk(std::span<const Scalar> values, Index k) {
  if (k < 1) throw InputError("topk: k must be >= 1");
  TopK<Scalar> out;
  const Index n = static_cast<Index>(values.size());
  const Index take = std::min(k, n);
  if (take == 0) return out;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  auto before = [&](Index a, Index b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + take, order.end(), before);
  order.resize(static_cast<std::size_t>(take));
  out.indices = std::move(order);
  out.scores.reserve(out.indices.size());
  for (Index i : out.indices) out.scores.push_back(values[i]);
  return out;
}

template <typename Scalar>
TopK<Scalar> topk(const std::vector<Scalar>& values, Index k) {
  return topk(std::span<const Scalar>(values), k);
}

// Row r of a row-major matrix as a span.
template <typename Scalar>
std::span<const Scalar> row_span(const Matrix<Scalar>& m, Index r) {
  return std::span<const Scalar>(m.data() + r * m.cols(), static_cast<std::size_t>(m.cols()));
}

}  // namespace iamm
