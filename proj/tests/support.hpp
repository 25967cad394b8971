#pragma once

// Shared helpers for the unit and acceptance suites: random tensors and a
// central finite-difference gradient oracle over the 64-bit tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "lens/tape.hpp"
#include "lens/tensor.hpp"

namespace lens::testing {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

inline Tensor<float> random_tensor_f(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return random_tensor(std::move(shape), rng, lo, hi).cast<float>();
}

using Builder = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates straddling a kink or a max tie
  std::size_t kink_mismatches = 0;  // skipped coordinates matching neither one-sided slope
};

/// Compares reverse-mode gradients of <w, f(inputs)> (w a fixed random
/// projection of the output) with central differences. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor). Coordinates whose
/// one-sided slopes disagree are treated as non-differentiable and skipped;
/// there the analytic value must still match one of the one-sided slopes.
inline GradCheckResult grad_check(const Builder& f, const std::vector<Tensor<double>>& inputs,
                                  std::mt19937_64& rng, double eps = 1e-4, double floor = 1e-3) {
  Tape<double> tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  const Var out = f(tape, vars);
  const Tensor<double> w = random_tensor(tape.value(out).shape(), rng, 0.5, 1.5);
  const Gradients<double> grads = tape.backward(out, w);

  auto objective = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> t;
    std::vector<Var> vs;
    for (const auto& x : xs) vs.push_back(t.leaf(x));
    const Tensor<double>& y = t.value(f(t, vs));
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += w[i] * y[i];
    return acc;
  };

  GradCheckResult res;
  std::vector<Tensor<double>> xs = inputs;
  const double f0 = objective(xs);
  // One-sided slopes at step h around coordinate k of input i.
  auto slopes = [&](std::size_t i, std::size_t k, double h) {
    const double orig = xs[i][k];
    xs[i][k] = orig + h;
    const double fp = objective(xs);
    xs[i][k] = orig - h;
    const double fm = objective(xs);
    xs[i][k] = orig;
    return std::pair{(fp - f0) / h, (f0 - fm) / h};
  };
  auto rel_error = [floor](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
  };
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor<double> g = grads.get_or_zero(vars[i], xs[i].shape());
    for (std::size_t k = 0; k < xs[i].size(); ++k) {
      const auto [right, left] = slopes(i, k, eps);
      // Smooth: right - left = eps * f'' + O(eps^3), so it halves with the
      // step. A slope jump inside the interval does not.
      const double gap = right - left;
      bool kink = std::abs(gap) > 1e-2 * std::max({1.0, std::abs(right), std::abs(left)});
      if (!kink && std::abs(gap) > 1e-7) {
        const auto [r2, l2] = slopes(i, k, eps / 2);
        kink = std::abs((r2 - l2) - gap / 2) > 0.25 * std::abs(gap);
      }
      if (kink) {
        ++res.skipped;
        if (std::min(rel_error(g[k], right), rel_error(g[k], left)) > 1e-2) ++res.kink_mismatches;
        continue;
      }
      const double rel = rel_error(g[k], (right + left) / 2);
      res.max_rel_error = std::max(res.max_rel_error, rel);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace lens::testing
