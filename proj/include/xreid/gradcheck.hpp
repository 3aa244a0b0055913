#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "xreid/rng.hpp"
#include "xreid/tensor.hpp"

namespace xreid {

struct GradReport {
  std::string param_name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double eps = 1e-3;
  double tol_rel = 1e-4;
  double tol_abs = 1e-7;
  // 0 checks every element; otherwise a seeded sample per parameter tensor.
  int max_samples_per_param = 0;
  uint64_t sample_seed = 0;
};

// Central-difference verification of reverse-mode gradients. The loss
// builder must re-read the parameter leaves on every call so that the +/- eps
// perturbations are visible. Runs entirely in double precision.
inline std::vector<GradReport> finite_diff_check(
    const std::vector<std::pair<std::string, Tensor<double>>>& params,
    const std::function<Tensor<double>()>& loss_fn, const GradCheckOptions& opt = {}) {
  if (!(opt.eps >= 1e-4 && opt.eps <= 1e-2))
    throw std::invalid_argument("finite_diff_check: eps must lie in [1e-4, 1e-2], got " +
                                std::to_string(opt.eps));
  if (opt.tol_rel <= 0.0)
    throw std::invalid_argument("finite_diff_check: tol_rel must be positive");

  Tensor<double> loss = loss_fn();
  if (!std::isfinite(loss.scalar()))
    throw NumericError("finite_diff_check: loss is non-finite at the evaluation point");
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) analytic.push_back(p.grad_or_zeros());

  Rng rng(opt.sample_seed);
  std::vector<GradReport> reports;
  reports.reserve(params.size());
  for (size_t k = 0; k < params.size(); ++k) {
    const auto& name = params[k].first;
    Tensor<double> p = params[k].second;
    const int64_t n = p.numel();

    std::vector<int64_t> idx;
    if (opt.max_samples_per_param > 0 && n > opt.max_samples_per_param) {
      // Seeded sample without replacement, kept in ascending order.
      auto perm = rng.permutation(static_cast<uint32_t>(n));
      idx.assign(perm.begin(), perm.begin() + opt.max_samples_per_param);
      std::sort(idx.begin(), idx.end());
    } else {
      idx.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    }

    GradReport rep;
    rep.param_name = name;
    auto& buf = p.leaf_value();
    for (const int64_t i : idx) {
      const double saved = buf[static_cast<size_t>(i)];
      buf[static_cast<size_t>(i)] = saved + opt.eps;
      const double lp = loss_fn().scalar();
      buf[static_cast<size_t>(i)] = saved - opt.eps;
      const double lm = loss_fn().scalar();
      buf[static_cast<size_t>(i)] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm))
        throw NumericError("finite_diff_check: non-finite loss while perturbing " + name +
                           "[" + std::to_string(i) + "]");
      const double numeric = (lp - lm) / (2.0 * opt.eps);
      const double a = analytic[k][static_cast<size_t>(i)];
      const double abs_err = std::fabs(a - numeric);
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel_err = abs_err / denom;
      rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
      rep.max_rel_err = std::max(rep.max_rel_err, rel_err);
    }
    rep.passed = (rep.max_rel_err <= opt.tol_rel) || (rep.max_abs_err <= opt.tol_abs);
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace xreid
