#pragma once

// Central finite-difference check of tape gradients.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "iamm/autodiff.hpp"
#include "iamm/params.hpp"

namespace iamm {

struct GradCheckOptions {
  double eps = 1e-5;
  double tolerance = 1e-3;
  // Entries checked per parameter tensor; tensors at or below this size are
  // checked exhaustively.
  Index samples_per_param = 8;
  // Denominator floor for the relative error, so that gradients that are
  // zero up to rounding compare absolutely.
  double floor = 1e-5;
  std::uint64_t seed = 7;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  Index checked = 0;
  bool passed = false;
};

inline double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// `loss_fn(tape)` records a scalar loss on the given tape. It must be
// deterministic: it is re-run on non-recording tapes for every perturbation.
template <typename Scalar, typename LossFn>
GradCheckReport grad_check(LossFn&& loss_fn, ParamStore<Scalar>& params, const GradCheckOptions& opt = {}) {
  params.zero_grad();
  {
    Tape<Scalar> tape;
    Var<Scalar> loss = loss_fn(tape);
    if (!std::isfinite(static_cast<double>(loss.value()(0, 0)))) throw NumericError("grad_check: non-finite loss");
    tape.backward(loss);
  }
  auto evaluate = [&]() {
    Tape<Scalar> tape(false);
    const double v = static_cast<double>(loss_fn(tape).value()(0, 0));
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss under perturbation");
    return v;
  };

  GradCheckReport report;
  std::mt19937_64 rng(opt.seed);
  for (auto& p : params) {
    std::vector<Index> idx(static_cast<std::size_t>(p.size()));
    std::iota(idx.begin(), idx.end(), Index(0));
    if (p.size() > opt.samples_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(opt.samples_per_param));
    }
    for (Index i : idx) {
      Scalar& theta = p.value.data()[i];
      const Scalar saved = theta;
      theta = static_cast<Scalar>(static_cast<double>(saved) + opt.eps);
      const double up = evaluate();
      theta = static_cast<Scalar>(static_cast<double>(saved) - opt.eps);
      const double down = evaluate();
      theta = saved;
      const double numeric = (up - down) / (2.0 * opt.eps);
      const double analytic = static_cast<double>(p.grad.size() ? p.grad.data()[i] : Scalar(0));
      const double rel = relative_error(analytic, numeric, opt.floor);
      ++report.checked;
      if (report.worst_index < 0 || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p.name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error <= opt.tolerance;
  return report;
}

}  // namespace iamm
