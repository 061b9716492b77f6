#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "athv/autodiff.hpp"
#include "athv/ops.hpp"
#include "athv/rng.hpp"

namespace athv::testing {

using D = double;

inline Tensor<D> random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor<D> t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// Random values bounded away from zero, for checks through kinks.
inline Tensor<D> random_away_from_zero(const Shape& shape, std::uint64_t seed, double margin = 0.1) {
  Rng rng(seed);
  Tensor<D> t(shape);
  for (auto& v : t.data()) {
    const double mag = rng.uniform(margin, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

/// Reduces any output to a scalar with fixed random weights so that every
/// output element contributes to the checked gradient.
inline Var<D> probe(const Var<D>& y, std::uint64_t seed = 99) {
  return sum(mul(y, Var<D>::constant(random_tensor(y.shape(), seed))));
}

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::string worst;
};

/// Relative error |a - n| / max(|a|, |n|), falling back to the absolute
/// error when both derivatives are below `floor`.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  const double denom = std::max(std::abs(analytic), std::abs(numeric));
  return denom < floor ? std::abs(analytic - numeric) : std::abs(analytic - numeric) / denom;
}

/// Central differences of `loss()` with respect to each element of each
/// input (at most `max_per_input` evenly spread elements per input), against
/// the gradients left by backward().
inline GradCheckResult gradcheck(const std::function<Var<D>()>& loss, const std::vector<Var<D>>& inputs,
                                 double step = 1e-6, std::size_t max_per_input = 64) {
  for (auto v : inputs) v.zero_grad();
  backward(loss());
  std::vector<Tensor<D>> analytic;
  for (const auto& v : inputs) analytic.push_back(v.grad());

  GradCheckResult r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Var<D> v = inputs[k];
    const std::size_t n = v.size();
    const std::size_t stride = std::max<std::size_t>(1, n / max_per_input);
    for (std::size_t i = 0; i < n; i += stride) {
      Tensor<D> base = v.value();
      Tensor<D> plus = base, minus = base;
      plus[i] += step;
      minus[i] -= step;
      v.assign(plus);
      const double fp = loss().value()[0];
      v.assign(minus);
      const double fm = loss().value()[0];
      v.assign(base);
      const double numeric = (fp - fm) / (2 * step);
      const double err = relative_error(analytic[k][i], numeric);
      ++r.checked;
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = "input " + std::to_string(k) + " element " + std::to_string(i) + ": analytic " +
                  std::to_string(analytic[k][i]) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return r;
}

}  // namespace athv::testing
