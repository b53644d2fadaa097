#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssnf/tensor.hpp"

namespace ssnf {

// Named, ordered view over a model's trainable tensors. The order is part of
// the contract: optimizer moments, gradient accumulation and checkpoint
// sections all follow it.
template <class S>
using ParamList = std::vector<std::pair<std::string, Tensor<S>*>>;

template <class S>
struct AdamState {
  std::vector<Tensor<S>> first_moment;
  std::vector<Tensor<S>> second_moment;
  int64_t step_count = 0;
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);

  static AdamState init(const ParamList<S>& params) {
    AdamState st;
    for (const auto& [name, t] : params) {
      st.first_moment.push_back(Tensor<S>(t->rows(), t->cols()));
      st.second_moment.push_back(Tensor<S>(t->rows(), t->cols()));
    }
    return st;
  }
};

// Bias-corrected Adam update, applied in place. Gradients are given in the
// same order as the parameter list.
template <class S>
void adam_step(ParamList<S>& params, const std::vector<Tensor<S>>& grads, AdamState<S>& state,
               S lr) {
  if (!(lr > S(0))) throw std::invalid_argument("adam_step: lr must be positive");
  if (grads.size() != params.size() || state.first_moment.size() != params.size())
    throw std::invalid_argument("adam_step: size mismatch");
  state.step_count += 1;
  const S b1 = state.beta1, b2 = state.beta2;
  const S corr1 = S(1) - S(std::pow(double(b1), double(state.step_count)));
  const S corr2 = S(1) - S(std::pow(double(b2), double(state.step_count)));
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor<S>& theta = *params[p].second;
    const Tensor<S>& g = grads[p];
    if (!g.same_shape(theta)) throw std::invalid_argument("adam_step: grad shape mismatch");
    if (!g.all_finite())
      throw std::runtime_error("adam_step: non-finite gradient for " + params[p].first);
    Tensor<S>& m = state.first_moment[p];
    Tensor<S>& v = state.second_moment[p];
    S* pm = m.data();
    S* pv = v.data();
    S* pt = theta.data();
    const S* pg = g.data();
    const int64_t n = theta.numel();
    for (int64_t i = 0; i < n; ++i) {
      pm[i] = b1 * pm[i] + (S(1) - b1) * pg[i];
      pv[i] = b2 * pv[i] + (S(1) - b2) * pg[i] * pg[i];
      const S mhat = pm[i] / corr1;
      const S vhat = pv[i] / corr2;
      pt[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace ssnf
