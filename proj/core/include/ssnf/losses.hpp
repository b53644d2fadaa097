#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ssnf/render.hpp"

namespace ssnf {

struct LossWeights {
  double lambda_s = 0.04;    // semantic
  double lambda_t = 0.1;     // transient regularization
  double lambda_sc = 0.05;   // solar correction
  double lambda_ds = 1000;   // depth supervision
  double beta_floor = 0.05;  // added to aggregated uncertainty inside the color loss
  double eta = 3;            // offset keeping the log term positive

  void validate() const {
    if (lambda_s < 0 || lambda_t < 0 || lambda_sc < 0 || lambda_ds < 0 || beta_floor < 0 ||
        eta < 0)
      throw std::invalid_argument("LossWeights: weights must be non-negative");
  }
};

struct LossSchedule {
  int plain_color_epochs = 2;         // epochs trained with the unweighted color loss
  int transient_reg_start_epoch = 4;  // first epoch with the regularization active
  double depth_supervision_fraction = 0.25;
  int64_t iterations_per_epoch = 1;

  void validate() const {
    if (transient_reg_start_epoch <= plain_color_epochs)
      throw std::invalid_argument(
          "LossSchedule: transient regularization must start after the plain color phase");
    if (iterations_per_epoch < 1)
      throw std::invalid_argument("LossSchedule: iterations_per_epoch must be positive");
  }

  // 1-based epoch of a 0-based iteration index
  int epoch_of(int64_t iteration) const { return int(iteration / iterations_per_epoch) + 1; }
  bool plain_color(int epoch) const { return epoch <= plain_color_epochs; }
  bool transient_reg_active(int epoch) const { return epoch >= transient_reg_start_epoch; }
  bool depth_active(int64_t iteration, int64_t total_iterations) const {
    return double(iteration) < depth_supervision_fraction * double(total_iterations);
  }
};

// ---- plain (non-differentiable) loss terms, used by tests and logging ----

// sum over rays of || pred - gt ||^2
template <class S>
S l2_color_loss(const std::vector<std::array<S, 3>>& pred,
                const std::vector<std::array<S, 3>>& gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("l2_color_loss: length mismatch");
  S acc = S(0);
  for (size_t r = 0; r < pred.size(); ++r)
    for (int c = 0; c < 3; ++c) {
      const S d = pred[r][size_t(c)] - gt[r][size_t(c)];
      acc += d * d;
    }
  return acc;
}

// sum over rays of ||pred - gt||^2 / (2 b'^2) + (log b' + eta) / 2,
// with b' = beta_agg + beta_floor
template <class S>
S uncertainty_color_loss(const std::vector<std::array<S, 3>>& pred,
                         const std::vector<std::array<S, 3>>& gt, const std::vector<S>& beta_agg,
                         S beta_floor = S(0.05), S eta = S(3)) {
  if (pred.size() != gt.size() || pred.size() != beta_agg.size())
    throw std::invalid_argument("uncertainty_color_loss: length mismatch");
  S acc = S(0);
  for (size_t r = 0; r < pred.size(); ++r) {
    if (beta_agg[r] < S(0)) throw std::domain_error("uncertainty_color_loss: negative beta");
    S sq = S(0);
    for (int c = 0; c < 3; ++c) {
      const S d = pred[r][size_t(c)] - gt[r][size_t(c)];
      sq += d * d;
    }
    const S bp = beta_agg[r] + beta_floor;
    acc += sq / (S(2) * bp * bp) + (std::log(bp) + eta) / S(2);
  }
  return acc;
}

// sum over transient rays of (1 - beta_agg)^2
template <class S>
S transient_reg_loss(const std::vector<S>& beta_agg) {
  S acc = S(0);
  for (S b : beta_agg) {
    const S d = S(1) - b;
    acc += d * d;
  }
  return acc;
}

// cross-entropy over non-transient rays; masked rays contribute exactly 0
template <class S>
S masked_semantic_loss(const std::vector<std::vector<S>>& pred_probs,
                       const std::vector<std::vector<S>>& gt_onehot,
                       const std::vector<bool>& transient_mask) {
  if (pred_probs.size() != gt_onehot.size() || pred_probs.size() != transient_mask.size())
    throw std::invalid_argument("masked_semantic_loss: length mismatch");
  S acc = S(0);
  for (size_t r = 0; r < pred_probs.size(); ++r) {
    if (transient_mask[r]) continue;
    for (size_t c = 0; c < pred_probs[r].size(); ++c) {
      if (gt_onehot[r][c] == S(0)) continue;
      acc -= gt_onehot[r][c] * std::log(std::max(pred_probs[r][c], S(1e-12)));
    }
  }
  return acc;
}

// mean squared depth error over valid rays; 0 when none are valid
template <class S>
S depth_supervision_loss(const std::vector<S>& pred, const std::vector<S>& gt,
                         const std::vector<bool>& valid) {
  if (pred.size() != gt.size() || pred.size() != valid.size())
    throw std::invalid_argument("depth_supervision_loss: length mismatch");
  S acc = S(0);
  int64_t n = 0;
  for (size_t r = 0; r < pred.size(); ++r) {
    if (!valid[r]) continue;
    const S d = pred[r] - gt[r];
    acc += d * d;
    ++n;
  }
  return n ? acc / S(n) : S(0);
}

// per solar ray: sum_i (T_i - sun_i)^2 + (1 - sum_i w_i * sun_i); the first
// term aligns the shading scalar with the transmittance, the second rewards
// lit visible surfaces
template <class S>
S solar_correction_loss(const std::vector<CompositingWeights<S>>& rays,
                        const std::vector<std::vector<S>>& sun) {
  if (rays.size() != sun.size()) throw std::invalid_argument("solar_correction_loss: length mismatch");
  S acc = S(0);
  for (size_t r = 0; r < rays.size(); ++r) {
    const auto& w = rays[r];
    if (sun[r].size() != w.weight.size())
      throw std::invalid_argument("solar_correction_loss: sample count mismatch");
    S lit = S(0);
    for (size_t i = 0; i < w.weight.size(); ++i) {
      const S d = w.transmittance[i] - sun[r][i];
      acc += d * d;
      lit += w.weight[i] * sun[r][i];
    }
    acc += S(1) - lit;
  }
  return acc;
}

// ---- scheduled total ----

struct RawLossTerms {
  double color_l2 = 0;
  double color_uncertainty = 0;
  double semantic = 0;
  double transient_reg = 0;
  double solar = 0;
  double depth = 0;
};

// Weighted contributions after applying the epoch/iteration schedule.
// Inactive terms are exactly zero.
struct LossBreakdown {
  double color_l2 = 0;
  double color_uncertainty = 0;
  double semantic = 0;
  double transient_reg = 0;
  double solar = 0;
  double depth = 0;
  double total = 0;
};

inline LossBreakdown total_loss(const RawLossTerms& raw, int epoch, int64_t iteration,
                                int64_t total_iterations, const LossWeights& w,
                                const LossSchedule& sched) {
  if (epoch < 1) throw std::invalid_argument("total_loss: epoch starts at 1");
  LossBreakdown out;
  if (sched.plain_color(epoch))
    out.color_l2 = raw.color_l2;
  else
    out.color_uncertainty = raw.color_uncertainty;
  out.semantic = w.lambda_s * raw.semantic;
  if (sched.transient_reg_active(epoch)) out.transient_reg = w.lambda_t * raw.transient_reg;
  out.solar = w.lambda_sc * raw.solar;
  if (sched.depth_active(iteration, total_iterations)) out.depth = w.lambda_ds * raw.depth;
  out.total = out.color_l2 + out.color_uncertainty + out.semantic + out.transient_reg +
              out.solar + out.depth;
  return out;
}

}  // namespace ssnf
