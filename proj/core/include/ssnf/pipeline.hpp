#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssnf/field.hpp"
#include "ssnf/graph.hpp"
#include "ssnf/losses.hpp"

namespace ssnf {

// Differentiable counterparts of the field / compositing / loss pipeline,
// expressed on the autodiff graph. Structural reductions (transmittance
// prefix sums, per-ray aggregation, one-hot embedding gathers) are matmuls
// with constant 0/1 matrices, so the fixed primitive set covers the whole
// model.

template <class S>
struct FieldNodes {
  typename Graph<S>::Val features;  // [M, width]
  typename Graph<S>::Val sigma;     // [M, 1]
  typename Graph<S>::Val albedo;    // [M, 3]
  typename Graph<S>::Val sun;       // [M, 1]
  typename Graph<S>::Val ambient;   // [M, 3]
  typename Graph<S>::Val beta;      // [M, 1]
  typename Graph<S>::Val sem;       // [M, C]
};

// Input / output names shared by the training graphs and the trainer.
namespace pipe {
// field inputs
inline constexpr const char* kPeX = "pe_x";
inline constexpr const char* kPeW = "pe_w";
inline constexpr const char* kEmbedSel = "embed_sel";
// main graph inputs
inline constexpr const char* kDeltas = "deltas";
inline constexpr const char* kTVals = "tvals";
inline constexpr const char* kGtRgb = "gt_rgb";
inline constexpr const char* kGtSem = "gt_sem";
inline constexpr const char* kStaticMask = "static_mask";
inline constexpr const char* kTransientMask = "transient_mask";
inline constexpr const char* kWeightL2 = "w_l2";
inline constexpr const char* kWeightUnc = "w_unc";
inline constexpr const char* kWeightSem = "w_sem";
inline constexpr const char* kWeightTreg = "w_treg";
// depth graph inputs
inline constexpr const char* kGtDepth = "gt_depth";
inline constexpr const char* kDepthValid = "depth_valid";
inline constexpr const char* kInvCount = "inv_count";
inline constexpr const char* kWeightDepth = "w_depth";
// solar graph inputs (transmittance/weights detached from the density path)
inline constexpr const char* kSolarT = "solar_t";
inline constexpr const char* kSolarW = "solar_w";
inline constexpr const char* kWeightSolar = "w_solar";
// outputs
inline constexpr const char* kLossTotal = "loss_total";
inline constexpr const char* kRawL2 = "raw_l2";
inline constexpr const char* kRawUnc = "raw_unc";
inline constexpr const char* kRawSem = "raw_sem";
inline constexpr const char* kRawTreg = "raw_treg";
inline constexpr const char* kRawDepth = "raw_depth";
inline constexpr const char* kRawSolar = "raw_solar";
inline constexpr const char* kRgb = "rgb";
inline constexpr const char* kBetaRay = "beta_ray";
inline constexpr const char* kSemRay = "sem_ray";
inline constexpr const char* kOpacity = "opacity";
inline constexpr const char* kTrans = "transmittance";
inline constexpr const char* kWeightsRn = "weights_rn";
inline constexpr const char* kDepthRay = "depth_ray";
inline constexpr const char* kSunRay = "sun_ray";
}  // namespace pipe

// Adds the field parameters as trainable leaves (named exactly like
// FieldParams::list) and wires the network over M samples. Expects input
// leaves "pe_x" [M, Dx], "pe_w" [M, Dw] and "embed" [M, n_embeddings]
// (one-hot frame rows) to be created by this call.
template <class S>
FieldNodes<S> build_field_graph(Graph<S>& g, const FieldConfig& cfg, int64_t m) {
  using Val = typename Graph<S>::Val;
  cfg.validate();

  Val pe_x = g.input(pipe::kPeX, m, cfg.position_input_dim());
  Val pe_w = g.input(pipe::kPeW, m, cfg.sun_input_dim());
  Val embed_sel = g.input(pipe::kEmbedSel, m, cfg.n_embeddings);

  auto softplus_linear = [&](Val x, Val w, Val b) { return g.softplus(g.linear(x, w, b)); };

  Val feat = pe_x;
  int in_dim = cfg.position_input_dim();
  for (int l = 0; l < cfg.backbone_layers; ++l) {
    Val w = g.param("bb.w" + std::to_string(l), in_dim, cfg.backbone_width);
    Val b = g.param("bb.b" + std::to_string(l), 1, cfg.backbone_width);
    feat = softplus_linear(feat, w, b);
    in_dim = cfg.backbone_width;
  }

  FieldNodes<S> f;
  f.features = feat;

  Val sig_raw = g.linear(feat, g.param("sigma.w", cfg.backbone_width, 1), g.param("sigma.b", 1, 1));
  f.sigma = g.scale_shift(g.softplus(sig_raw), S(cfg.sigma_scale), S(0));

  f.albedo =
      g.sigmoid(g.linear(feat, g.param("alb.w", cfg.backbone_width, 3), g.param("alb.b", 1, 3)));

  const int dw = cfg.sun_input_dim();
  Val sun_h = g.softplus(g.add(
      g.linear(feat, g.param("sun.wf", cfg.backbone_width, cfg.sun_hidden),
               g.param("sun.b1", 1, cfg.sun_hidden)),
      g.matmul(pe_w, g.param("sun.wd", dw, cfg.sun_hidden))));
  f.sun = g.sigmoid(g.linear(sun_h, g.param("sun.w2", cfg.sun_hidden, 1), g.param("sun.b2", 1, 1)));

  Val amb_h = softplus_linear(pe_w, g.param("amb.w1", dw, cfg.ambient_hidden),
                              g.param("amb.b1", 1, cfg.ambient_hidden));
  f.ambient = g.sigmoid(
      g.linear(amb_h, g.param("amb.w2", cfg.ambient_hidden, 3), g.param("amb.b2", 1, 3)));

  Val emb = g.matmul(embed_sel, g.param("embed", cfg.n_embeddings, cfg.embed_dim));
  Val beta_h = g.softplus(g.add(
      g.linear(feat, g.param("beta.wf", cfg.backbone_width, cfg.beta_hidden),
               g.param("beta.b1", 1, cfg.beta_hidden)),
      g.matmul(emb, g.param("beta.we", cfg.embed_dim, cfg.beta_hidden))));
  f.beta =
      g.softplus(g.linear(beta_h, g.param("beta.w2", cfg.beta_hidden, 1), g.param("beta.b2", 1, 1)));

  Val sem_h = softplus_linear(feat, g.param("sem.w1", cfg.backbone_width, cfg.semantic_hidden),
                              g.param("sem.b1", 1, cfg.semantic_hidden));
  Val sem_raw = g.linear(sem_h, g.param("sem.w2", cfg.semantic_hidden, cfg.n_classes),
                         g.param("sem.b2", 1, cfg.n_classes));
  f.sem = cfg.semantic_activation == SemanticActivation::kSigmoid ? g.sigmoid(sem_raw) : sem_raw;
  return f;
}

template <class S>
void bind_field_params(Graph<S>& g, FieldParams<S>& params) {
  for (auto& [name, tensor] : params.list()) g.bind(name, *tensor);
}

template <class S>
struct CompositingNodes {
  typename Graph<S>::Val transmittance;  // [R, N]
  typename Graph<S>::Val alpha;          // [R, N]
  typename Graph<S>::Val weights;        // [R, N]
  typename Graph<S>::Val weights_flat;   // [R*N, 1]
};

// alpha_i = 1 - exp(-sigma_i delta_i); T_i = exp(-sum_{j<i} sigma_j delta_j),
// the prefix sum realized as a matmul with a constant strict upper-triangular
// ones matrix.
template <class S>
CompositingNodes<S> build_compositing(Graph<S>& g, typename Graph<S>::Val sigma_flat,
                                      typename Graph<S>::Val deltas, int64_t rays,
                                      int64_t samples) {
  Tensor<S> tri(samples, samples);
  for (int64_t j = 0; j < samples; ++j)
    for (int64_t i = j + 1; i < samples; ++i) tri.at(j, i) = S(1);

  auto sig = g.reshape(sigma_flat, rays, samples);
  auto sigdel = g.mul(sig, deltas);
  auto prefix = g.matmul(sigdel, g.constant(std::move(tri)));
  CompositingNodes<S> c;
  c.transmittance = g.exp(g.neg(prefix));
  c.alpha = g.scale_shift(g.exp(g.neg(sigdel)), S(-1), S(1));
  c.weights = g.mul(c.transmittance, c.alpha);
  c.weights_flat = g.reshape(c.weights, rays * samples, 1);
  return c;
}

// Per-ray aggregation sum_i w_i * v_i for [M, d] per-sample values: weight,
// reshape to [R, N*d], then collapse N with a constant selector matrix.
template <class S>
typename Graph<S>::Val aggregate_rays(Graph<S>& g, typename Graph<S>::Val values,
                                      typename Graph<S>::Val weights_flat, int64_t rays,
                                      int64_t samples, int64_t dim) {
  Tensor<S> sel(samples * dim, dim);
  for (int64_t n = 0; n < samples; ++n)
    for (int64_t d = 0; d < dim; ++d) sel.at(n * dim + d, d) = S(1);
  auto weighted = g.mul(values, g.broadcast(weights_flat, rays * samples, dim));
  return g.matmul(g.reshape(weighted, rays, samples * dim), g.constant(std::move(sel)));
}

// The per-batch training graph: color (plain and uncertainty-weighted),
// masked semantic cross-entropy and transient regularization, with the
// schedule expressed through the scalar weight inputs.
template <class S>
Graph<S> build_train_graph(const FieldConfig& cfg, int64_t rays, int64_t samples,
                           const LossWeights& lw) {
  using Val = typename Graph<S>::Val;
  Graph<S> g;
  const int64_t m = rays * samples;
  FieldNodes<S> f = build_field_graph(g, cfg, m);

  Val deltas = g.input(pipe::kDeltas, rays, samples);
  Val tvals = g.input(pipe::kTVals, rays, samples);
  Val gt_rgb = g.input(pipe::kGtRgb, rays, 3);
  Val gt_sem = g.input(pipe::kGtSem, rays, cfg.n_classes);
  Val static_mask = g.input(pipe::kStaticMask, rays, 1);
  Val transient_mask = g.input(pipe::kTransientMask, rays, 1);
  Val w_l2 = g.input(pipe::kWeightL2, 1, 1);
  Val w_unc = g.input(pipe::kWeightUnc, 1, 1);
  Val w_sem = g.input(pipe::kWeightSem, 1, 1);
  Val w_treg = g.input(pipe::kWeightTreg, 1, 1);

  CompositingNodes<S> c = build_compositing(g, f.sigma, deltas, rays, samples);

  // c(x, w) = albedo * (sun + (1 - sun) * ambient), aggregated by weight
  Val sun3 = g.broadcast(f.sun, m, 3);
  Val shade = g.mul(f.albedo, g.add(sun3, g.mul(g.scale_shift(sun3, S(-1), S(1)), f.ambient)));
  Val rgb = aggregate_rays(g, shade, c.weights_flat, rays, samples, 3);

  Val beta_ray = g.row_sum(g.reshape(g.mul(f.beta, c.weights_flat), rays, samples));
  Val sem_ray = aggregate_rays(g, f.sem, c.weights_flat, rays, samples, cfg.n_classes);
  Val depth_ray = g.row_sum(g.mul(c.weights, tvals));
  Val sun_ray = g.row_sum(g.reshape(g.mul(f.sun, c.weights_flat), rays, samples));

  // plain L2 color term
  Val resid = g.sub(rgb, gt_rgb);
  Val sq = g.mul(resid, resid);
  Val raw_l2 = g.sum(sq);

  // uncertainty-weighted color term
  Val sqnorm = g.row_sum(sq);
  Val bprime = g.scale_shift(beta_ray, S(1), S(lw.beta_floor));
  Val logb = g.log(bprime);
  Val inv_2b2 = g.scale_shift(g.exp(g.scale_shift(logb, S(-2), S(0))), S(0.5), S(0));
  Val raw_unc =
      g.sum(g.add(g.mul(sqnorm, inv_2b2), g.scale_shift(logb, S(0.5), S(lw.eta * 0.5))));

  // transient regularization toward beta = 1 on transient-labeled rays
  Val dev = g.scale_shift(beta_ray, S(-1), S(1));
  Val raw_treg = g.sum(g.mul(g.mul(dev, dev), transient_mask));

  // masked semantic cross-entropy on aggregated logits
  Val lse = g.log(g.row_sum(g.exp(sem_ray)));
  Val picked = g.row_sum(g.mul(sem_ray, gt_sem));
  Val raw_sem = g.sum(g.mul(g.sub(lse, picked), static_mask));

  Val total = g.add(g.add(g.mul(raw_l2, w_l2), g.mul(raw_unc, w_unc)),
                    g.add(g.mul(raw_sem, w_sem), g.mul(raw_treg, w_treg)));

  g.mark_output(pipe::kLossTotal, total);
  g.mark_output(pipe::kRawL2, raw_l2);
  g.mark_output(pipe::kRawUnc, raw_unc);
  g.mark_output(pipe::kRawSem, raw_sem);
  g.mark_output(pipe::kRawTreg, raw_treg);
  g.mark_output(pipe::kRgb, rgb);
  g.mark_output(pipe::kBetaRay, beta_ray);
  g.mark_output(pipe::kSemRay, sem_ray);
  g.mark_output(pipe::kOpacity, g.row_sum(c.weights));
  g.mark_output(pipe::kTrans, c.transmittance);
  g.mark_output(pipe::kWeightsRn, c.weights);
  g.mark_output(pipe::kDepthRay, depth_ray);
  g.mark_output(pipe::kSunRay, sun_ray);
  return g;
}

// Depth supervision graph: mean squared depth error over valid rays.
// kInvCount carries 1/(number of valid rays), or 0 for an empty batch.
template <class S>
Graph<S> build_depth_graph(const FieldConfig& cfg, int64_t rays, int64_t samples) {
  using Val = typename Graph<S>::Val;
  Graph<S> g;
  FieldNodes<S> f = build_field_graph(g, cfg, rays * samples);
  Val deltas = g.input(pipe::kDeltas, rays, samples);
  Val tvals = g.input(pipe::kTVals, rays, samples);
  Val gt_depth = g.input(pipe::kGtDepth, rays, 1);
  Val valid = g.input(pipe::kDepthValid, rays, 1);
  Val inv_count = g.input(pipe::kInvCount, 1, 1);
  Val w_depth = g.input(pipe::kWeightDepth, 1, 1);

  CompositingNodes<S> c = build_compositing(g, f.sigma, deltas, rays, samples);
  Val depth = g.row_sum(g.mul(c.weights, tvals));
  Val resid = g.sub(depth, gt_depth);
  Val raw = g.mul(g.sum(g.mul(g.mul(resid, resid), valid)), inv_count);
  g.mark_output(pipe::kRawDepth, raw);
  g.mark_output(pipe::kLossTotal, g.mul(raw, w_depth));
  g.mark_output(pipe::kDepthRay, depth);
  return g;
}

// Solar correction graph. Rays run along the sun direction; the target
// transmittance and weights are computed outside the graph and bound as
// inputs, so only the shading head receives gradients.
template <class S>
Graph<S> build_solar_graph(const FieldConfig& cfg, int64_t rays, int64_t samples) {
  using Val = typename Graph<S>::Val;
  Graph<S> g;
  FieldNodes<S> f = build_field_graph(g, cfg, rays * samples);
  Val t_target = g.input(pipe::kSolarT, rays, samples);
  Val w_target = g.input(pipe::kSolarW, rays, samples);
  Val w_solar = g.input(pipe::kWeightSolar, 1, 1);

  Val sun_rn = g.reshape(f.sun, rays, samples);
  Val d = g.sub(t_target, sun_rn);
  Val term1 = g.sum(g.mul(d, d));
  Val lit = g.row_sum(g.mul(w_target, sun_rn));
  Val term2 = g.sum(g.scale_shift(lit, S(-1), S(1)));
  Val raw = g.add(term1, term2);
  g.mark_output(pipe::kRawSolar, raw);
  g.mark_output(pipe::kLossTotal, g.mul(raw, w_solar));
  return g;
}

}  // namespace ssnf
