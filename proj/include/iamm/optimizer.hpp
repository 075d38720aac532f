#pragma once

#include <cmath>
#include <vector>

#include "iamm/params.hpp"

namespace iamm {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  std::vector<Matrix<Scalar>> m, v;  // per parameter, store order
  long step = 0;
};

template <typename Scalar>
class Adam {
 public:
  Adam(const ParamStore<Scalar>& params, AdamOptions opt) : opt_(opt) {
    for (const auto& p : params) {
      state_.m.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
      state_.v.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
    }
  }

  // Applies one update from the accumulated gradients; parameters without a
  // gradient buffer are skipped but still age their moments.
  void step(ParamStore<Scalar>& params) {
    ++state_.step;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(state_.step));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(state_.step));
    const Scalar b1 = static_cast<Scalar>(opt_.beta1), b2 = static_cast<Scalar>(opt_.beta2);
    const Scalar lr = static_cast<Scalar>(opt_.learning_rate * std::sqrt(c2) / c1);
    const Scalar eps = static_cast<Scalar>(opt_.eps * std::sqrt(c2));
    std::size_t i = 0;
    for (auto& p : params) {
      auto& m = state_.m[i];
      auto& v = state_.v[i];
      ++i;
      if (p.grad.size() == 0) {
        m *= b1;
        v *= b2;
        continue;
      }
      m = b1 * m + (Scalar(1) - b1) * p.grad;
      v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= lr * m.array() / (v.array().sqrt() + eps);
    }
  }

  AdamState<Scalar>& state() { return state_; }
  const AdamState<Scalar>& state() const { return state_; }
  const AdamOptions& options() const { return opt_; }

 private:
  AdamOptions opt_;
  AdamState<Scalar> state_;
};

}  // namespace iamm
