#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace evtex {

// Standard bias-corrected Adam over a flat parameter vector.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(size_t n) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
  }
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void adam_step(std::vector<double>& x, const std::vector<double>& grad, AdamState& state,
                      double lr) {
  if (x.size() != grad.size() || x.size() != state.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  for (double g : grad)
    if (!std::isfinite(g)) throw numeric_error("adam_step: non-finite gradient");
  ++state.step;
  double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < x.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    double mhat = state.m[i] / c1;
    double vhat = state.v[i] / c2;
    x[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace evtex
