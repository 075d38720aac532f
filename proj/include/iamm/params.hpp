#pragma once

// Named parameter registry. Modules hold raw pointers into the store; the
// store owns the parameters and keeps their addresses stable.

#include <cmath>
#include <deque>
#include <random>
#include <string>
#include <unordered_map>

#include "iamm/autodiff.hpp"

namespace iamm {

template <typename Scalar>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Parameter<Scalar>& create(const std::string& name, Index rows, Index cols) {
    if (index_.count(name)) throw InputError("duplicate parameter name: " + name);
    params_.push_back(Parameter<Scalar>{name, Matrix<Scalar>::Zero(rows, cols), Matrix<Scalar>::Zero(rows, cols)});
    index_.emplace(name, params_.size() - 1);
    return params_.back();
  }

  Parameter<Scalar>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  Parameter<Scalar>& at(const std::string& name) {
    auto* p = find(name);
    if (!p) throw InputError("unknown parameter: " + name);
    return *p;
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  Index total_size() const {
    Index n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  std::size_t count() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter<Scalar>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <typename Scalar>
void init_xavier(Parameter<Scalar>& p, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(dist(rng));
}

template <typename Scalar>
void init_normal(Parameter<Scalar>& p, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(dist(rng));
}

template <typename Scalar>
void init_constant(Parameter<Scalar>& p, Scalar v) {
  p.value.setConstant(v);
}

}  // namespace iamm
