#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ssnf {

// Per-ray alpha compositing terms: alpha_i = 1 - exp(-sigma_i * delta_i),
// T_i = prod_{j<i} (1 - alpha_j), weight_i = T_i * alpha_i.
template <class S>
struct CompositingWeights {
  std::vector<S> alpha;
  std::vector<S> transmittance;
  std::vector<S> weight;
  S opacity = S(0);  // sum of weights = 1 - prod(1 - alpha)
};

template <class S>
CompositingWeights<S> compositing_weights(const std::vector<S>& sigmas,
                                          const std::vector<S>& deltas) {
  if (sigmas.size() != deltas.size())
    throw std::invalid_argument("compositing_weights: length mismatch");
  const size_t n = sigmas.size();
  CompositingWeights<S> w;
  w.alpha.resize(n);
  w.transmittance.resize(n);
  w.weight.resize(n);
  S t = S(1);
  for (size_t i = 0; i < n; ++i) {
    if (sigmas[i] < S(0)) throw std::domain_error("compositing_weights: negative density");
    if (deltas[i] <= S(0)) throw std::domain_error("compositing_weights: non-positive delta");
    const S a = S(1) - std::exp(-sigmas[i] * deltas[i]);
    w.alpha[i] = a;
    w.transmittance[i] = t;
    w.weight[i] = t * a;
    w.opacity += w.weight[i];
    t *= S(1) - a;
  }
  return w;
}

// Irradiance shading of one sample: albedo * (sun + (1 - sun) * ambient).
template <class S>
std::array<S, 3> shade_sample(const std::array<S, 3>& albedo, S sun,
                              const std::array<S, 3>& ambient) {
  std::array<S, 3> rgb;
  for (int c = 0; c < 3; ++c) rgb[size_t(c)] = albedo[size_t(c)] * (sun + (S(1) - sun) * ambient[size_t(c)]);
  return rgb;
}

// Weighted sum of shaded sample colors along a ray.
template <class S>
std::array<S, 3> render_color(const CompositingWeights<S>& w,
                              const std::vector<std::array<S, 3>>& albedo,
                              const std::vector<S>& sun,
                              const std::vector<std::array<S, 3>>& ambient) {
  if (albedo.size() != w.weight.size() || sun.size() != w.weight.size() ||
      ambient.size() != w.weight.size())
    throw std::invalid_argument("render_color: length mismatch");
  std::array<S, 3> rgb{S(0), S(0), S(0)};
  for (size_t i = 0; i < w.weight.size(); ++i) {
    const auto shaded = shade_sample(albedo[i], sun[i], ambient[i]);
    for (int c = 0; c < 3; ++c) rgb[size_t(c)] += w.weight[i] * shaded[size_t(c)];
  }
  return rgb;
}

// Aggregates per-sample class logits by compositing weight, converts to
// probabilities with a softmax, and picks the argmax class (lowest index
// wins ties).
template <class S>
struct SemanticRender {
  std::vector<S> probs;
  int cls = 0;
};

template <class S>
SemanticRender<S> render_semantic(const CompositingWeights<S>& w,
                                  const std::vector<std::vector<S>>& sem) {
  if (sem.size() != w.weight.size()) throw std::invalid_argument("render_semantic: length mismatch");
  if (sem.empty()) throw std::invalid_argument("render_semantic: empty ray");
  const size_t n_cls = sem[0].size();
  std::vector<S> agg(n_cls, S(0));
  for (size_t i = 0; i < sem.size(); ++i)
    for (size_t c = 0; c < n_cls; ++c) agg[c] += w.weight[i] * sem[i][c];

  SemanticRender<S> out;
  out.probs.resize(n_cls);
  S mx = agg[0];
  for (S v : agg) mx = std::max(mx, v);
  S denom = S(0);
  for (size_t c = 0; c < n_cls; ++c) {
    out.probs[c] = std::exp(agg[c] - mx);
    denom += out.probs[c];
  }
  for (size_t c = 0; c < n_cls; ++c) out.probs[c] /= denom;
  out.cls = 0;
  for (size_t c = 1; c < n_cls; ++c)
    if (out.probs[c] > out.probs[size_t(out.cls)]) out.cls = int(c);
  return out;
}

// Weighted sum of a per-sample scalar (uncertainty, sun shading, or depth
// via the sample t values).
template <class S>
S render_scalar(const CompositingWeights<S>& w, const std::vector<S>& values) {
  if (values.size() != w.weight.size()) throw std::invalid_argument("render_scalar: length mismatch");
  S acc = S(0);
  for (size_t i = 0; i < values.size(); ++i) acc += w.weight[i] * values[i];
  return acc;
}

// Structural semantic visualization: class color scaled by the aggregated
// sun shading scalar.
template <class S>
std::array<S, 3> semantic_shaded_viz(const std::vector<S>& sem_probs, S sun_agg,
                                     const std::vector<std::array<S, 3>>& colormap) {
  size_t cls = 0;
  for (size_t c = 1; c < sem_probs.size(); ++c)
    if (sem_probs[c] > sem_probs[cls]) cls = c;
  if (cls >= colormap.size())
    throw std::out_of_range("semantic_shaded_viz: class outside colormap");
  std::array<S, 3> rgb = colormap[cls];
  for (auto& v : rgb) v *= sun_agg;
  return rgb;
}

}  // namespace ssnf
