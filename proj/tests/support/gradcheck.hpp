#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hpgm/numcore/ops.hpp"
#include "hpgm/numcore/tensor.hpp"

namespace hpgm::testkit {

/// Result of comparing reverse-mode gradients with central differences.
struct GradCheck {
  double rel_err = 0.0;
  double max_abs_analytic = 0.0;
};

/// Builds a scalar probe loss sum(f(inputs) * R) for a fixed random R, then
/// compares the tape's gradient for every input element with a central
/// difference at step h.
inline GradCheck check_gradients(const std::function<nc::Tensor(const std::vector<nc::Tensor>&)>& f,
                                 std::vector<nc::Tensor> inputs, std::uint64_t seed, double h = 1e-3) {
  nc::Tensor probe_out;
  {
    std::vector<nc::Tensor> frozen;
    for (auto& t : inputs) frozen.push_back(t.detach());
    probe_out = f(frozen);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nc::Tensor weights(probe_out.shape());
  for (double& w : weights.data()) w = u(rng);

  auto loss_value = [&](const std::vector<nc::Tensor>& in) {
    nc::Tensor out = f(in);
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
    return s;
  };

  std::vector<nc::Tensor> leaves;
  for (auto& t : inputs) leaves.push_back(t.detach().set_requires_grad(true));
  {
    nc::Tape tape;
    nc::Tensor loss = nc::sum(nc::mul(f(leaves), weights));
    tape.backward(loss);
  }

  double diff2 = 0, a2 = 0, n2 = 0, amax = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      std::vector<nc::Tensor> plus, minus;
      for (auto& t : inputs) {
        plus.push_back(t.detach());
        minus.push_back(t.detach());
      }
      plus[k][i] += h;
      minus[k][i] -= h;
      const double numeric = (loss_value(plus) - loss_value(minus)) / (2 * h);
      const double analytic = leaves[k].grad()[i];
      diff2 += (numeric - analytic) * (numeric - analytic);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
      amax = std::max(amax, std::abs(analytic));
    }
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
  GradCheck r;
  r.rel_err = (a2 == 0 && n2 == 0) ? 0.0 : std::sqrt(diff2) / denom;
  r.max_abs_analytic = amax;
  return r;
}

/// Uniform tensor in [lo, hi], optionally pushing values away from zero so
/// kinked activations are never evaluated within one step of their kink.
inline nc::Tensor random_tensor(nc::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                double min_abs = 0.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  nc::Tensor t(std::move(shape));
  for (double& x : t.data()) {
    do {
      x = u(rng);
    } while (std::abs(x) < min_abs);
  }
  return t;
}

}  // namespace hpgm::testkit
