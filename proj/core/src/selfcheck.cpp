#include "ssnf/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "ssnf/colormap.hpp"
#include "ssnf/losses.hpp"
#include "ssnf/metrics.hpp"
#include "ssnf/pipeline.hpp"
#include "ssnf/render.hpp"
#include "ssnf/rng.hpp"
#include "ssnf/rpc.hpp"
#include "ssnf/scene.hpp"

namespace ssnf {

namespace {

char detail_buf[512];

// d(sum(seed * output))/d(leaf) via central differences on the graph forward
double fd_vs_backward(Graph<double>& g, const std::string& output, const Tensor<double>& seed,
                      const std::vector<std::string>& leaves, double h = 1e-5) {
  g.run_forward();
  auto grads = g.backward(output, seed);
  auto objective = [&]() {
    const Tensor<double>& out = g.value(output);
    double acc = 0;
    for (int64_t i = 0; i < out.numel(); ++i) acc += seed[size_t(i)] * out[size_t(i)];
    return acc;
  };
  double worst = 0;
  for (const auto& name : leaves) {
    Tensor<double>& leaf = g.leaf_data(name);
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    for (int64_t i = 0; i < leaf.numel(); ++i) {
      const double saved = leaf[size_t(i)];
      leaf[size_t(i)] = saved + h;
      g.run_forward();
      const double fp = objective();
      leaf[size_t(i)] = saved - h;
      g.run_forward();
      const double fm = objective();
      leaf[size_t(i)] = saved;
      const double fd = (fp - fm) / (2 * h);
      const double ad = it->second[size_t(i)];
      worst = std::max(worst, std::abs(ad - fd) / (std::abs(ad) + std::abs(fd) + 1e-6));
    }
  }
  g.run_forward();
  return worst;
}

}  // namespace

CheckResult check_autodiff_gradients() {
  double worst = 0;
  for (uint64_t cfg_seed = 1; cfg_seed <= 20; ++cfg_seed) {
    Rng rng(cfg_seed, 400);
    FieldConfig cfg;
    cfg.backbone_layers = 1 + int(rng.next_below(2));
    cfg.backbone_width = 6 + int(rng.next_below(6));
    cfg.semantic_hidden = 4 + int(rng.next_below(4));
    cfg.sun_hidden = 4 + int(rng.next_below(4));
    cfg.ambient_hidden = 3;
    cfg.beta_hidden = 4;
    cfg.pe_levels_position = 2;
    cfg.pe_levels_sun = 1;
    cfg.n_classes = 3 + int(rng.next_below(3));
    cfg.embed_dim = 2;
    cfg.n_embeddings = 2;
    cfg.sigma_scale = 20;
    const int64_t rays = 3, samples = 6, m = rays * samples;
    LossWeights lw;

    Graph<double> g = build_train_graph<double>(cfg, rays, samples, lw);
    auto params = FieldParams<double>::init(cfg, cfg_seed + 100);
    bind_field_params(g, params);

    Tensor<double>& pe_x = g.leaf_data(pipe::kPeX);
    Tensor<double>& pe_w = g.leaf_data(pipe::kPeW);
    Tensor<double>& embed = g.leaf_data(pipe::kEmbedSel);
    for (int64_t i = 0; i < m; ++i) {
      const double p[3] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const double w[3] = {rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7), rng.uniform(0.3, 1)};
      positional_encode(p, 3, cfg.pe_levels_position, pe_x.data() + i * pe_x.cols());
      positional_encode(w, 3, cfg.pe_levels_sun, pe_w.data() + i * pe_w.cols());
      embed.at(i, int64_t(rng.next_below(2))) = 1;
    }
    Tensor<double>& deltas = g.leaf_data(pipe::kDeltas);
    Tensor<double>& tvals = g.leaf_data(pipe::kTVals);
    for (int64_t r = 0; r < rays; ++r) {
      double t = 0;
      for (int64_t k = 0; k < samples; ++k) {
        deltas.at(r, k) = rng.uniform(0.02, 0.08);
        t += deltas.at(r, k);
        tvals.at(r, k) = t;
      }
    }
    Tensor<double>& gt_rgb = g.leaf_data(pipe::kGtRgb);
    Tensor<double>& gt_sem = g.leaf_data(pipe::kGtSem);
    Tensor<double>& smask = g.leaf_data(pipe::kStaticMask);
    Tensor<double>& tmask = g.leaf_data(pipe::kTransientMask);
    gt_sem.fill(0);
    for (int64_t r = 0; r < rays; ++r) {
      for (int c = 0; c < 3; ++c) gt_rgb.at(r, c) = rng.next_double();
      gt_sem.at(r, int64_t(rng.next_below(uint64_t(cfg.n_classes)))) = 1;
      const bool transient = r == 1;
      smask.at(r, 0) = transient ? 0 : 1;
      tmask.at(r, 0) = transient ? 1 : 0;
    }
    g.bind(pipe::kWeightL2, Tensor<double>::scalar(1));
    g.bind(pipe::kWeightUnc, Tensor<double>::scalar(1));
    g.bind(pipe::kWeightSem, Tensor<double>::scalar(lw.lambda_s));
    g.bind(pipe::kWeightTreg, Tensor<double>::scalar(lw.lambda_t));

    // every trainable leaf of the model
    std::vector<std::string> leaves = g.trainable_names();

    // each loss term, then the color and semantic renders under random seeds
    for (const char* term : {pipe::kRawL2, pipe::kRawUnc, pipe::kRawSem, pipe::kRawTreg})
      worst = std::max(worst, fd_vs_backward(g, term, Tensor<double>::scalar(1), leaves));
    Tensor<double> rgb_seed(rays, 3);
    for (int64_t i = 0; i < rgb_seed.numel(); ++i) rgb_seed[size_t(i)] = rng.uniform(-1, 1);
    worst = std::max(worst, fd_vs_backward(g, pipe::kRgb, rgb_seed, leaves));
    Tensor<double> sem_seed(rays, cfg.n_classes);
    for (int64_t i = 0; i < sem_seed.numel(); ++i) sem_seed[size_t(i)] = rng.uniform(-1, 1);
    worst = std::max(worst, fd_vs_backward(g, pipe::kSemRay, sem_seed, leaves));

    // depth and solar terms on their dedicated graphs
    if (cfg_seed <= 5) {
      Graph<double> dg = build_depth_graph<double>(cfg, rays, samples);
      auto dparams = FieldParams<double>::init(cfg, cfg_seed + 300);
      bind_field_params(dg, dparams);
      dg.leaf_data(pipe::kPeX) = pe_x;
      dg.leaf_data(pipe::kPeW) = pe_w;
      dg.leaf_data(pipe::kEmbedSel) = embed;
      dg.leaf_data(pipe::kDeltas) = deltas;
      dg.leaf_data(pipe::kTVals) = tvals;
      Tensor<double>& gtd = dg.leaf_data(pipe::kGtDepth);
      Tensor<double>& val = dg.leaf_data(pipe::kDepthValid);
      for (int64_t r = 0; r < rays; ++r) {
        gtd.at(r, 0) = rng.uniform(0.1, 0.4);
        val.at(r, 0) = r == 2 ? 0 : 1;
      }
      dg.bind(pipe::kInvCount, Tensor<double>::scalar(0.5));
      dg.bind(pipe::kWeightDepth, Tensor<double>::scalar(1000));
      worst = std::max(worst, fd_vs_backward(dg, pipe::kRawDepth, Tensor<double>::scalar(1),
                                             dg.trainable_names()));

      Graph<double> sg = build_solar_graph<double>(cfg, rays, samples);
      auto sparams = FieldParams<double>::init(cfg, cfg_seed + 500);
      bind_field_params(sg, sparams);
      sg.leaf_data(pipe::kPeX) = pe_x;
      sg.leaf_data(pipe::kPeW) = pe_w;
      sg.leaf_data(pipe::kEmbedSel) = embed;
      Tensor<double>& st = sg.leaf_data(pipe::kSolarT);
      Tensor<double>& sw = sg.leaf_data(pipe::kSolarW);
      for (int64_t i = 0; i < st.numel(); ++i) {
        st[size_t(i)] = rng.next_double();
        sw[size_t(i)] = rng.next_double() * 0.1;
      }
      sg.bind(pipe::kWeightSolar, Tensor<double>::scalar(0.05));
      worst = std::max(worst, fd_vs_backward(sg, pipe::kRawSolar, Tensor<double>::scalar(1),
                                             sg.trainable_names()));
    }
  }
  std::snprintf(detail_buf, sizeof(detail_buf),
                "max relative gradient error %.3g (tolerance 1e-4)", worst);
  return {worst < 1e-4, detail_buf};
}

CheckResult check_compositing_invariants() {
  Rng rng(2024);
  double worst_norm = 0;
  bool monotone = true, occlusion = true;
  for (int trial = 0; trial < 10000; ++trial) {
    const size_t n = 2 + rng.next_below(63);
    std::vector<double> sig(n), del(n);
    for (size_t i = 0; i < n; ++i) {
      sig[i] = rng.uniform(0, 120);
      del[i] = rng.uniform(1e-4, 0.1);
    }
    if (trial % 10 == 0) sig[0] = 1e6;  // saturation cases
    auto w = compositing_weights(sig, del);
    double prod = 1;
    for (size_t i = 0; i < n; ++i) {
      prod *= 1.0 - w.alpha[i];
      if (i + 1 < n && w.transmittance[i + 1] > w.transmittance[i]) monotone = false;
    }
    worst_norm = std::max(worst_norm, std::abs(w.opacity - (1.0 - prod)));
    if (trial % 10 == 0 && w.weight[0] <= 1.0 - 1e-6) occlusion = false;
  }
  std::snprintf(detail_buf, sizeof(detail_buf),
                "max |sum(w) - (1 - prod(1-a))| = %.3g (tol 1e-10), monotone=%d, occlusion=%d",
                worst_norm, int(monotone), int(occlusion));
  return {worst_norm < 1e-10 && monotone && occlusion, detail_buf};
}

CheckResult check_loss_closed_forms() {
  using A3 = std::array<double, 3>;
  bool ok = true;
  std::string detail;

  const std::vector<A3> gt{{0.3, 0.5, 0.7}};
  const double unc0 = uncertainty_color_loss(gt, gt, std::vector<double>{0.0});
  const double expect_unc0 = (std::log(0.05) + 3.0) / 2.0;
  ok = ok && std::abs(unc0 - expect_unc0) < 1e-9;

  const double treg1 = transient_reg_loss(std::vector<double>{1.0, 1.0});
  ok = ok && treg1 == 0;

  std::vector<std::vector<double>> uniform{std::vector<double>(5, 0.2),
                                           std::vector<double>(5, 0.2)};
  std::vector<std::vector<double>> onehot{{0, 0, 1, 0, 0}, {1, 0, 0, 0, 0}};
  const double sem = masked_semantic_loss(uniform, onehot, {false, false});
  ok = ok && std::abs(sem - 2.0 * (-std::log(0.2))) < 1e-9;

  // masked rays contribute exactly zero
  std::vector<std::vector<double>> probs3 = uniform;
  std::vector<std::vector<double>> onehot3 = onehot;
  probs3.push_back({0.9, 0.025, 0.025, 0.025, 0.025});
  onehot3.push_back({0, 0, 0, 0, 1});
  const double sem3 = masked_semantic_loss(probs3, onehot3, {false, false, true});
  ok = ok && sem3 == sem;

  std::snprintf(detail_buf, sizeof(detail_buf),
                "unc(0,0)=%.12f vs %.12f, treg(1)=%g, ce(uniform)=%.12f vs %.12f, mask_delta=%g",
                unc0, expect_unc0, treg1, sem, 2.0 * (-std::log(0.2)), sem3 - sem);
  return {ok, detail_buf};
}

CheckResult check_rpc_round_trip() {
  double worst = 0;
  for (uint64_t seed = 1; seed <= 4; ++seed) {
    RpcModel m = make_affine_rpc(
        Vec3{0.1 * double(seed), -0.07 * double(seed), -1.0}.normalized(), 64, 64);
    if (seed > 2) {
      Rng crng(seed, 7);
      for (int i = 4; i < 20; ++i) {
        m.line_num[size_t(i)] += crng.uniform(-0.02, 0.02);
        m.samp_num[size_t(i)] += crng.uniform(-0.02, 0.02);
        m.line_den[size_t(i)] += crng.uniform(-0.01, 0.01);
        m.samp_den[size_t(i)] += crng.uniform(-0.01, 0.01);
      }
    }
    Rng rng(seed, 8);
    for (int i = 0; i < 1000; ++i) {
      const double lat = rng.uniform(-0.9, 0.9), lon = rng.uniform(-0.9, 0.9);
      const double alt = rng.uniform(-0.5, 0.5);
      auto px = rpc_project(m, lat, lon, alt);
      auto ll = rpc_localize(m, px.row, px.col, alt);
      worst = std::max({worst, std::abs(ll.lat - lat), std::abs(ll.lon - lon)});
    }
  }
  std::snprintf(detail_buf, sizeof(detail_buf),
                "max round-trip error %.3g normalized units (tol 1e-6)", worst);
  return {worst < 1e-6, detail_buf};
}

CheckResult check_corruption_contract() {
  SceneSpec scene = generate_scene(5, "town", 4, 48);
  RpcModel cam = make_affine_rpc(Vec3{0, 0, -1}, scene.grid, scene.grid);
  FrameRecord frame = oracle_render(scene, cam, scene.sun_dirs[0], 0);

  double worst_err = 0, min_region = 1e9;
  for (double loss : {0.1, 0.2, 0.3}) {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      CorruptionConfig cfg;
      cfg.target_loss = loss;
      cfg.seed = seed;
      auto corrupted = corrupt_labels(frame.labels, scene.grid, scene.grid, kNumClasses, cfg);
      const double acc = semantic_accuracy(corrupted, frame.labels);
      worst_err = std::max(worst_err, std::abs(acc - (1.0 - loss)));
      min_region = std::min(min_region, mean_corruption_region_size(frame.labels, corrupted,
                                                                    scene.grid, scene.grid));
    }
  }
  std::snprintf(detail_buf, sizeof(detail_buf),
                "max |accuracy - target| = %.4f (tol 0.01), min mean region = %.1f px (min 10)",
                worst_err, min_region);
  return {worst_err <= 0.01 && min_region >= 10.0, detail_buf};
}

CheckResult check_schedule_log(const std::string& log_path) {
  std::ifstream in(log_path);
  if (!in) return {false, "cannot open " + log_path};
  struct Line {
    int64_t iter = 0;
    int epoch = 0;
    std::map<std::string, double> vals;
  };
  std::vector<Line> lines;
  std::string text;
  while (std::getline(in, text)) {
    Line l;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq);
      const double v = std::strtod(tok.c_str() + eq + 1, nullptr);
      if (key == "iter") l.iter = int64_t(v);
      else if (key == "epoch") l.epoch = int(v);
      else l.vals[key] = v;
    }
    if (!l.vals.empty()) lines.push_back(l);
  }
  if (lines.empty()) return {false, "log is empty"};
  const int64_t total = lines.back().iter + 1;

  bool color_ok = true, depth_ok = true, depth_seen_early = false;
  int first_treg_epoch = 0;
  for (const auto& l : lines) {
    const bool plain = l.epoch <= 2;
    if (plain && (l.vals.at("color_l2") <= 0 || l.vals.at("color_unc") != 0)) color_ok = false;
    if (!plain && (l.vals.at("color_l2") != 0 || l.vals.at("color_unc") <= 0)) color_ok = false;
    if (l.vals.at("treg") != 0 && first_treg_epoch == 0) first_treg_epoch = l.epoch;
    if (double(l.iter) < 0.25 * double(total) && l.vals.at("depth") > 0) depth_seen_early = true;
    if (double(l.iter) >= 0.25 * double(total) && l.vals.at("depth") != 0) depth_ok = false;
  }
  const bool treg_ok = first_treg_epoch == 4;
  std::snprintf(detail_buf, sizeof(detail_buf),
                "color_phases=%d first_treg_epoch=%d depth_early=%d depth_late_zero=%d "
                "(lines=%zu, total=%lld)",
                int(color_ok), first_treg_epoch, int(depth_seen_early), int(depth_ok),
                lines.size(), static_cast<long long>(total));
  return {color_ok && treg_ok && depth_seen_early && depth_ok, detail_buf};
}

}  // namespace ssnf
