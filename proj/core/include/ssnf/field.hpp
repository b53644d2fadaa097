#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssnf/adam.hpp"
#include "ssnf/geometry.hpp"
#include "ssnf/graph.hpp"
#include "ssnf/rng.hpp"
#include "ssnf/tensor.hpp"

namespace ssnf {

enum class SemanticActivation { kSigmoid, kNone };

// Architecture of the volumetric field. Defaults follow the full-scale
// setup; desk() is the small preset used by the fast experiments.
struct FieldConfig {
  int backbone_layers = 8;
  int backbone_width = 512;
  int semantic_hidden = 256;
  int n_classes = 5;
  int embed_dim = 4;
  int pe_levels_position = 10;  // L_x
  int pe_levels_sun = 4;        // L_omega
  bool encode_sun = true;
  SemanticActivation semantic_activation = SemanticActivation::kSigmoid;
  int sun_hidden = 128;
  int ambient_hidden = 32;
  int beta_hidden = 128;
  double sigma_scale = 25.0;  // density = sigma_scale * softplus(raw)
  int n_embeddings = 1;       // one row per training image

  static FieldConfig desk() {
    FieldConfig c;
    c.backbone_layers = 2;
    c.backbone_width = 64;
    c.semantic_hidden = 64;
    c.sun_hidden = 64;
    c.ambient_hidden = 16;
    c.beta_hidden = 32;
    return c;
  }

  int position_input_dim() const { return 2 * pe_levels_position * 3; }
  int sun_input_dim() const { return encode_sun ? 2 * pe_levels_sun * 3 : 3; }

  void validate() const {
    if (backbone_layers < 1 || backbone_width < 1 || semantic_hidden < 1 || embed_dim < 1 ||
        pe_levels_position < 1 || pe_levels_sun < 1 || sun_hidden < 1 || ambient_hidden < 1 ||
        beta_hidden < 1 || n_embeddings < 1 || sigma_scale <= 0)
      throw std::invalid_argument("FieldConfig: all sizes must be positive");
    if (n_classes < 2) throw std::invalid_argument("FieldConfig: need at least 2 classes");
  }
};

// Frequency encoding of a d-vector: for k = 0..L-1 emit sin(2^k pi p) for
// every component, then cos(2^k pi p). Output length 2*L*d.
template <class S>
void positional_encode(const S* p, int d, int levels, S* out) {
  const S pi = S(3.14159265358979323846);
  for (int k = 0; k < levels; ++k) {
    const S freq = S(std::ldexp(1.0, k)) * pi;
    for (int j = 0; j < d; ++j) {
      out[k * 2 * d + j] = std::sin(freq * p[j]);
      out[k * 2 * d + d + j] = std::cos(freq * p[j]);
    }
  }
}

template <class S>
std::vector<S> positional_encode(const std::vector<S>& p, int levels) {
  std::vector<S> out(size_t(2 * levels * p.size()));
  positional_encode(p.data(), int(p.size()), levels, out.data());
  return out;
}

// Per-sample outputs of the field.
struct FieldOutput {
  double sigma = 0;                  // density, >= 0
  double albedo[3] = {0, 0, 0};      // intrinsic color, in [0,1]
  double sun = 0;                    // sun shading scalar, in [0,1]
  double ambient[3] = {0, 0, 0};     // sky color, in [0,1]
  double beta = 0;                   // transient uncertainty, >= 0
  std::vector<double> sem_logits;    // C values, in (0,1) under sigmoid
};

template <class S>
struct FieldParams {
  FieldConfig config;

  std::vector<Tensor<S>> backbone_w, backbone_b;
  Tensor<S> sigma_w, sigma_b;
  Tensor<S> albedo_w, albedo_b;
  Tensor<S> sun_w_feat, sun_w_dir, sun_b1, sun_w2, sun_b2;
  Tensor<S> amb_w1, amb_b1, amb_w2, amb_b2;
  Tensor<S> beta_w_feat, beta_w_embed, beta_b1, beta_w2, beta_b2;
  Tensor<S> sem_w1, sem_b1, sem_w2, sem_b2;
  Tensor<S> embeddings;  // [n_embeddings, embed_dim]

  static FieldParams init(const FieldConfig& cfg, uint64_t seed);

  // Fixed, named parameter order shared by the optimizer, the graphs and
  // the checkpoint format.
  ParamList<S> list() {
    ParamList<S> out;
    for (size_t i = 0; i < backbone_w.size(); ++i) {
      out.push_back({"bb.w" + std::to_string(i), &backbone_w[i]});
      out.push_back({"bb.b" + std::to_string(i), &backbone_b[i]});
    }
    out.push_back({"sigma.w", &sigma_w});
    out.push_back({"sigma.b", &sigma_b});
    out.push_back({"alb.w", &albedo_w});
    out.push_back({"alb.b", &albedo_b});
    out.push_back({"sun.wf", &sun_w_feat});
    out.push_back({"sun.wd", &sun_w_dir});
    out.push_back({"sun.b1", &sun_b1});
    out.push_back({"sun.w2", &sun_w2});
    out.push_back({"sun.b2", &sun_b2});
    out.push_back({"amb.w1", &amb_w1});
    out.push_back({"amb.b1", &amb_b1});
    out.push_back({"amb.w2", &amb_w2});
    out.push_back({"amb.b2", &amb_b2});
    out.push_back({"beta.wf", &beta_w_feat});
    out.push_back({"beta.we", &beta_w_embed});
    out.push_back({"beta.b1", &beta_b1});
    out.push_back({"beta.w2", &beta_w2});
    out.push_back({"beta.b2", &beta_b2});
    out.push_back({"sem.w1", &sem_w1});
    out.push_back({"sem.b1", &sem_b1});
    out.push_back({"sem.w2", &sem_w2});
    out.push_back({"sem.b2", &sem_b2});
    out.push_back({"embed", &embeddings});
    return out;
  }
};

// Raw (pre-activation) network evaluation over a batch of encoded samples.
// pe_x: [M, position_input_dim], pe_w: [M, sun_input_dim],
// embed_rows: one embedding row index per sample.
template <class S>
struct FieldBatch {
  Tensor<S> sigma;    // [M,1]
  Tensor<S> albedo;   // [M,3]
  Tensor<S> sun;      // [M,1]
  Tensor<S> ambient;  // [M,3]
  Tensor<S> beta;     // [M,1]
  Tensor<S> sem;      // [M,C]
};

namespace detail {
template <class S>
void add_bias_softplus(Tensor<S>& x, const Tensor<S>& b) {
  for (int64_t r = 0; r < x.rows(); ++r)
    for (int64_t c = 0; c < x.cols(); ++c) x.at(r, c) = stable_softplus(x.at(r, c) + b.at(0, c));
}
template <class S>
void add_bias_sigmoid(Tensor<S>& x, const Tensor<S>& b) {
  for (int64_t r = 0; r < x.rows(); ++r)
    for (int64_t c = 0; c < x.cols(); ++c) x.at(r, c) = stable_sigmoid(x.at(r, c) + b.at(0, c));
}
template <class S>
void add_bias(Tensor<S>& x, const Tensor<S>& b) {
  for (int64_t r = 0; r < x.rows(); ++r)
    for (int64_t c = 0; c < x.cols(); ++c) x.at(r, c) += b.at(0, c);
}
}  // namespace detail

// Semantic head logits from trunk features; sigmoid unless the ablation
// disables the activation.
template <class S>
Tensor<S> semantic_logits(const FieldParams<S>& p, const Tensor<S>& features) {
  Tensor<S> h;
  matmul_into(h, features, p.sem_w1);
  detail::add_bias_softplus(h, p.sem_b1);
  Tensor<S> s;
  matmul_into(s, h, p.sem_w2);
  detail::add_bias(s, p.sem_b2);
  if (p.config.semantic_activation == SemanticActivation::kSigmoid)
    for (int64_t i = 0; i < s.numel(); ++i) s[i] = stable_sigmoid(s[i]);
  return s;
}

template <class S>
FieldBatch<S> field_forward(const FieldParams<S>& p, const Tensor<S>& pe_x, const Tensor<S>& pe_w,
                            const std::vector<int>& embed_rows) {
  const FieldConfig& cfg = p.config;
  const int64_t m = pe_x.rows();
  if (pe_w.rows() != m || int64_t(embed_rows.size()) != m)
    throw std::invalid_argument("field_forward: batch size mismatch");

  Tensor<S> feat = pe_x, next;
  for (size_t l = 0; l < p.backbone_w.size(); ++l) {
    matmul_into(next, feat, p.backbone_w[l]);
    detail::add_bias_softplus(next, p.backbone_b[l]);
    std::swap(feat, next);
  }

  FieldBatch<S> out;
  matmul_into(out.sigma, feat, p.sigma_w);
  for (int64_t i = 0; i < m; ++i)
    out.sigma[i] = S(cfg.sigma_scale) * stable_softplus(out.sigma[i] + p.sigma_b[0]);

  matmul_into(out.albedo, feat, p.albedo_w);
  detail::add_bias_sigmoid(out.albedo, p.albedo_b);

  Tensor<S> h;
  matmul_into(h, feat, p.sun_w_feat);
  h.map().noalias() += pe_w.map() * p.sun_w_dir.map();
  detail::add_bias_softplus(h, p.sun_b1);
  matmul_into(out.sun, h, p.sun_w2);
  detail::add_bias_sigmoid(out.sun, p.sun_b2);

  matmul_into(h, pe_w, p.amb_w1);
  detail::add_bias_softplus(h, p.amb_b1);
  matmul_into(out.ambient, h, p.amb_w2);
  detail::add_bias_sigmoid(out.ambient, p.amb_b2);

  Tensor<S> emb(m, cfg.embed_dim);
  for (int64_t i = 0; i < m; ++i) {
    const int row = embed_rows[size_t(i)];
    if (row < 0 || row >= cfg.n_embeddings)
      throw std::out_of_range("field_forward: embedding index out of range");
    for (int e = 0; e < cfg.embed_dim; ++e) emb.at(i, e) = p.embeddings.at(row, e);
  }
  matmul_into(h, feat, p.beta_w_feat);
  h.map().noalias() += emb.map() * p.beta_w_embed.map();
  detail::add_bias_softplus(h, p.beta_b1);
  matmul_into(out.beta, h, p.beta_w2);
  for (int64_t i = 0; i < m; ++i) out.beta[i] = stable_softplus(out.beta[i] + p.beta_b2[0]);

  out.sem = semantic_logits(p, feat);
  return out;
}

// Single-point evaluation in normalized scene coordinates. omega must be a
// unit vector (the sun direction).
template <class S>
FieldOutput evaluate_field(const FieldParams<S>& p, const Vec3& x, const Vec3& omega,
                           int embed_index) {
  if (std::abs(omega.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("evaluate_field: omega must be unit length");
  const FieldConfig& cfg = p.config;
  std::vector<S> px{S(x.x), S(x.y), S(x.z)};
  std::vector<S> pw{S(omega.x), S(omega.y), S(omega.z)};
  Tensor<S> pe_x = Tensor<S>::from(1, cfg.position_input_dim(),
                                   positional_encode(px, cfg.pe_levels_position));
  Tensor<S> pe_w = cfg.encode_sun
                       ? Tensor<S>::from(1, cfg.sun_input_dim(),
                                         positional_encode(pw, cfg.pe_levels_sun))
                       : Tensor<S>::from(1, 3, pw);
  FieldBatch<S> b = field_forward(p, pe_x, pe_w, std::vector<int>{embed_index});
  FieldOutput out;
  out.sigma = double(b.sigma[0]);
  out.sun = double(b.sun[0]);
  out.beta = double(b.beta[0]);
  for (int i = 0; i < 3; ++i) {
    out.albedo[i] = double(b.albedo[i]);
    out.ambient[i] = double(b.ambient[i]);
  }
  out.sem_logits.resize(size_t(cfg.n_classes));
  for (int c = 0; c < cfg.n_classes; ++c) out.sem_logits[size_t(c)] = double(b.sem[size_t(c)]);
  return out;
}

template <class S>
FieldParams<S> FieldParams<S>::init(const FieldConfig& cfg, uint64_t seed) {
  cfg.validate();
  FieldParams<S> p;
  p.config = cfg;
  int counter = 0;
  auto make = [&](int64_t rows, int64_t cols, int64_t fan_in) {
    Rng rng(seed, stream::kInit, uint64_t(counter++));
    return Tensor<S>::uniform(rows, cols, S(1.0 / std::sqrt(double(fan_in))), rng);
  };

  int in_dim = cfg.position_input_dim();
  for (int l = 0; l < cfg.backbone_layers; ++l) {
    p.backbone_w.push_back(make(in_dim, cfg.backbone_width, in_dim));
    p.backbone_b.push_back(Tensor<S>(1, cfg.backbone_width));
    in_dim = cfg.backbone_width;
  }
  const int w = cfg.backbone_width;
  const int dw = cfg.sun_input_dim();
  p.sigma_w = make(w, 1, w);
  p.sigma_b = Tensor<S>::full(1, 1, S(-2));  // start semi-transparent
  p.albedo_w = make(w, 3, w);
  p.albedo_b = Tensor<S>(1, 3);
  p.sun_w_feat = make(w, cfg.sun_hidden, w + dw);
  p.sun_w_dir = make(dw, cfg.sun_hidden, w + dw);
  p.sun_b1 = Tensor<S>(1, cfg.sun_hidden);
  p.sun_w2 = make(cfg.sun_hidden, 1, cfg.sun_hidden);
  p.sun_b2 = Tensor<S>::full(1, 1, S(1));  // start mostly lit
  p.amb_w1 = make(dw, cfg.ambient_hidden, dw);
  p.amb_b1 = Tensor<S>(1, cfg.ambient_hidden);
  p.amb_w2 = make(cfg.ambient_hidden, 3, cfg.ambient_hidden);
  p.amb_b2 = Tensor<S>(1, 3);
  p.beta_w_feat = make(w, cfg.beta_hidden, w + cfg.embed_dim);
  p.beta_w_embed = make(cfg.embed_dim, cfg.beta_hidden, w + cfg.embed_dim);
  p.beta_b1 = Tensor<S>(1, cfg.beta_hidden);
  p.beta_w2 = make(cfg.beta_hidden, 1, cfg.beta_hidden);
  p.beta_b2 = Tensor<S>::full(1, 1, S(-1));  // beta starts near 0.3
  p.sem_w1 = make(w, cfg.semantic_hidden, w);
  p.sem_b1 = Tensor<S>(1, cfg.semantic_hidden);
  p.sem_w2 = make(cfg.semantic_hidden, cfg.n_classes, cfg.semantic_hidden);
  p.sem_b2 = Tensor<S>(1, cfg.n_classes);
  p.embeddings = make(cfg.n_embeddings, cfg.embed_dim, cfg.embed_dim);
  return p;
}

}  // namespace ssnf
