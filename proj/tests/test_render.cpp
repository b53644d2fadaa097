#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "ssnf/graph.hpp"
#include "ssnf/pipeline.hpp"
#include "ssnf/render.hpp"
#include "ssnf/rng.hpp"

using namespace ssnf;

TEST_CASE("compositing: empty space gives zero weights") {
  std::vector<double> sig(8, 0.0), del(8, 0.1);
  auto w = compositing_weights(sig, del);
  for (size_t i = 0; i < 8; ++i) {
    CHECK(w.alpha[i] == 0);
    CHECK(w.weight[i] == 0);
    CHECK(w.transmittance[i] == 1);
  }
  CHECK(w.opacity == 0);
}

TEST_CASE("compositing: sigma*delta = ln 2 gives alpha 0.5") {
  std::vector<double> sig{std::log(2.0)}, del{1.0};
  auto w = compositing_weights(sig, del);
  CHECK(w.alpha[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("compositing: two samples with alpha 0.5 each") {
  // choose sigma*delta = ln 2 twice: alpha = (0.5, 0.5)
  std::vector<double> sig{std::log(2.0), std::log(2.0)}, del{1.0, 1.0};
  auto w = compositing_weights(sig, del);
  CHECK(w.transmittance[0] == doctest::Approx(1.0));
  CHECK(w.transmittance[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w.weight[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w.weight[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(w.opacity == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("compositing rejects negative density and bad deltas") {
  CHECK_THROWS(compositing_weights<double>({-1.0}, {0.1}));
  CHECK_THROWS(compositing_weights<double>({1.0}, {0.0}));
  CHECK_THROWS(compositing_weights<double>({1.0, 1.0}, {0.1}));
}

TEST_CASE("compositing invariants on random rays") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const size_t n = 2 + rng.next_below(63);
    std::vector<double> sig(n), del(n);
    for (size_t i = 0; i < n; ++i) {
      sig[i] = rng.uniform(0, 80);
      del[i] = rng.uniform(1e-4, 0.1);
    }
    auto w = compositing_weights(sig, del);
    double prod = 1;
    for (size_t i = 0; i < n; ++i) {
      prod *= 1.0 - w.alpha[i];
      if (i + 1 < n) CHECK(w.transmittance[i + 1] <= w.transmittance[i]);
    }
    CHECK(std::abs(w.opacity - (1.0 - prod)) < 1e-10);
  }
}

TEST_CASE("compositing: an opaque first sample occludes everything behind it") {
  std::vector<double> sig{1e6, 3.0, 2.0}, del{0.1, 0.1, 0.1};
  auto w = compositing_weights(sig, del);
  CHECK(w.weight[0] > 1.0 - 1e-6);
  CHECK(w.weight[1] < 1e-6);
  CHECK(w.weight[2] < 1e-6);
}

TEST_CASE("shade_sample closed forms") {
  using A3 = std::array<double, 3>;
  A3 albedo{0.3, 0.6, 0.9}, black{0, 0, 0};
  auto full = shade_sample(albedo, 1.0, black);
  for (int c = 0; c < 3; ++c) CHECK(full[size_t(c)] == albedo[size_t(c)]);
  auto dark = shade_sample(albedo, 0.0, black);
  for (int c = 0; c < 3; ++c) CHECK(dark[size_t(c)] == 0);
  A3 white{1, 1, 1}, amb{0.4, 0.4, 0.4};
  auto mid = shade_sample(white, 0.5, amb);
  for (int c = 0; c < 3; ++c) CHECK(mid[size_t(c)] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("render_color: single opaque sample returns its shaded color") {
  std::vector<double> sig{1e9}, del{1.0};
  auto w = compositing_weights(sig, del);
  std::vector<std::array<double, 3>> albedo{{0.2, 0.5, 0.8}}, amb{{0, 0, 0}};
  std::vector<double> sun{1.0};
  auto rgb = render_color(w, albedo, sun, amb);
  CHECK(rgb[0] == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(rgb[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rgb[2] == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("render_color: all-zero weights give black") {
  std::vector<double> sig(4, 0.0), del(4, 0.2);
  auto w = compositing_weights(sig, del);
  std::vector<std::array<double, 3>> albedo(4, {0.9, 0.9, 0.9}), amb(4, {0.5, 0.5, 0.5});
  std::vector<double> sun(4, 0.7);
  auto rgb = render_color(w, albedo, sun, amb);
  for (int c = 0; c < 3; ++c) CHECK(rgb[size_t(c)] == 0);
}

TEST_CASE("render_color and render_scalar match an independent loop oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t n = 2 + rng.next_below(30);
    std::vector<double> sig(n), del(n), sun(n), beta(n);
    std::vector<std::array<double, 3>> albedo(n), amb(n);
    for (size_t i = 0; i < n; ++i) {
      sig[i] = rng.uniform(0, 50);
      del[i] = rng.uniform(1e-3, 0.1);
      sun[i] = rng.next_double();
      beta[i] = rng.uniform(0, 2);
      for (int c = 0; c < 3; ++c) {
        albedo[i][size_t(c)] = rng.next_double();
        amb[i][size_t(c)] = rng.next_double();
      }
    }
    auto w = compositing_weights(sig, del);
    auto rgb = render_color(w, albedo, sun, amb);

    // brute-force re-derivation from first principles
    double t = 1.0;
    std::array<double, 3> expect{0, 0, 0};
    double expect_beta = 0;
    for (size_t i = 0; i < n; ++i) {
      const double a = 1.0 - std::exp(-sig[i] * del[i]);
      for (int c = 0; c < 3; ++c)
        expect[size_t(c)] +=
            t * a * (albedo[i][size_t(c)] * (sun[i] + (1 - sun[i]) * amb[i][size_t(c)]));
      expect_beta += t * a * beta[i];
      t *= 1.0 - a;
    }
    for (int c = 0; c < 3; ++c) CHECK(std::abs(rgb[size_t(c)] - expect[size_t(c)]) < 1e-6);
    CHECK(std::abs(render_scalar(w, beta) - expect_beta) < 1e-6);
  }
}

TEST_CASE("render_scalar: saturated ray of ones aggregates to 1") {
  std::vector<double> sig(16, 1e5), del(16, 0.05);
  auto w = compositing_weights(sig, del);
  CHECK(render_scalar(w, std::vector<double>(16, 1.0)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(render_scalar(w, std::vector<double>(16, 0.0)) == 0);
}

TEST_CASE("render_semantic: single opaque sample picks its class") {
  std::vector<double> sig{1e9}, del{1.0};
  auto w = compositing_weights(sig, del);
  SemanticRender<double> out = render_semantic(w, {{0.9, 0.1, 0.1, 0.1, 0.1}});
  CHECK(out.cls == 0);
  CHECK(out.probs[0] > out.probs[1]);
}

TEST_CASE("render_semantic: identical logits give uniform probabilities, class 0") {
  std::vector<double> sig{1e9}, del{1.0};
  auto w = compositing_weights(sig, del);
  SemanticRender<double> out = render_semantic(w, {{0.4, 0.4, 0.4, 0.4, 0.4}});
  for (double p : out.probs) CHECK(p == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(out.cls == 0);
}

TEST_CASE("render_semantic: hand-computed weighted aggregation") {
  // weights (0.5, 0.25) from two alpha=0.5 samples, two classes
  std::vector<double> sig{std::log(2.0), std::log(2.0)}, del{1.0, 1.0};
  auto w = compositing_weights(sig, del);
  std::vector<std::vector<double>> sem{{0.8, 0.2}, {0.1, 0.6}};
  auto out = render_semantic(w, sem);
  const double z0 = 0.5 * 0.8 + 0.25 * 0.1;
  const double z1 = 0.5 * 0.2 + 0.25 * 0.6;
  const double p0 = std::exp(z0) / (std::exp(z0) + std::exp(z1));
  CHECK(out.probs[0] == doctest::Approx(p0).epsilon(1e-12));
  CHECK(out.probs[1] == doctest::Approx(1 - p0).epsilon(1e-12));
  CHECK(out.cls == 0);
}

TEST_CASE("render_semantic is permutation-equivariant in the class index") {
  Rng rng(5);
  const size_t n = 12, n_cls = 5;
  std::vector<double> sig(n), del(n);
  std::vector<std::vector<double>> sem(n, std::vector<double>(n_cls));
  for (size_t i = 0; i < n; ++i) {
    sig[i] = rng.uniform(0, 30);
    del[i] = rng.uniform(0.01, 0.1);
    for (size_t c = 0; c < n_cls; ++c) sem[i][c] = rng.next_double();
  }
  const std::vector<size_t> perm{3, 0, 4, 1, 2};
  auto permuted = sem;
  for (size_t i = 0; i < n; ++i)
    for (size_t c = 0; c < n_cls; ++c) permuted[i][perm[c]] = sem[i][c];
  auto w = compositing_weights(sig, del);
  auto base = render_semantic(w, sem);
  auto mapped = render_semantic(w, permuted);
  for (size_t c = 0; c < n_cls; ++c)
    CHECK(mapped.probs[perm[c]] == doctest::Approx(base.probs[c]).epsilon(1e-12));
  CHECK(mapped.cls == int(perm[size_t(base.cls)]));
}

TEST_CASE("semantic_shaded_viz scales the class color by aggregated sun") {
  std::vector<std::array<double, 3>> cmap{{0.2, 0.8, 0.2}, {1, 0, 0}};
  std::vector<double> probs{0.9, 0.1};
  auto full = semantic_shaded_viz(probs, 1.0, cmap);
  CHECK(full[0] == doctest::Approx(0.2));
  CHECK(full[1] == doctest::Approx(0.8));
  auto dark = semantic_shaded_viz(probs, 0.0, cmap);
  for (int c = 0; c < 3; ++c) CHECK(dark[size_t(c)] == 0);
  auto half = semantic_shaded_viz(probs, 0.5, cmap);
  CHECK(half[0] == doctest::Approx(0.1));
  CHECK(half[1] == doctest::Approx(0.4));
  CHECK(half[2] == doctest::Approx(0.1));
  std::vector<double> bad{0.1, 0.2, 0.7};
  CHECK_THROWS(semantic_shaded_viz(bad, 1.0, cmap));
}

TEST_CASE("graph compositing matches the plain implementation") {
  const int64_t rays = 5, samples = 16;
  Rng rng(31);
  Tensor<double> sigma(rays * samples, 1), deltas(rays, samples);
  for (int64_t i = 0; i < rays * samples; ++i) sigma[size_t(i)] = rng.uniform(0, 60);
  for (int64_t i = 0; i < rays * samples; ++i) deltas[size_t(i)] = rng.uniform(1e-3, 0.08);

  Graph<double> g;
  auto sig_in = g.input("sigma", rays * samples, 1);
  auto del_in = g.input("deltas", rays, samples);
  auto c = build_compositing(g, sig_in, del_in, rays, samples);
  g.mark_output("w", c.weights);
  g.mark_output("t", c.transmittance);
  auto out = g.forward({{"sigma", sigma}, {"deltas", deltas}});

  for (int64_t r = 0; r < rays; ++r) {
    std::vector<double> sig_r(static_cast<size_t>(samples)), del_r(static_cast<size_t>(samples));
    for (int64_t i = 0; i < samples; ++i) {
      sig_r[size_t(i)] = sigma[size_t(r * samples + i)];
      del_r[size_t(i)] = deltas[size_t(r * samples + i)];
    }
    auto w = compositing_weights(sig_r, del_r);
    for (int64_t i = 0; i < samples; ++i) {
      CHECK(out.at("w").at(r, i) == doctest::Approx(w.weight[size_t(i)]).epsilon(1e-11));
      CHECK(out.at("t").at(r, i) == doctest::Approx(w.transmittance[size_t(i)]).epsilon(1e-11));
    }
  }
}

TEST_CASE("gradient of rendered color w.r.t. densities matches finite differences") {
  const int64_t rays = 2, samples = 6;
  Rng rng(47);
  Graph<double> g;
  auto sig_raw = g.param("sigma_raw", rays * samples, 1);
  auto sig = g.softplus(sig_raw);  // keep densities positive while perturbing
  auto del_in = g.input("deltas", rays, samples);
  auto albedo = g.input("albedo", rays * samples, 3);
  auto sun = g.input("sun", rays * samples, 1);
  auto ambient = g.input("ambient", rays * samples, 3);
  auto c = build_compositing(g, sig, del_in, rays, samples);
  auto sun3 = g.broadcast(sun, rays * samples, 3);
  auto shade = g.mul(albedo, g.add(sun3, g.mul(g.scale_shift(sun3, -1.0, 1.0), ambient)));
  auto rgb = aggregate_rays(g, shade, c.weights_flat, rays, samples, 3);
  g.mark_output("loss", g.sum(g.mul(rgb, rgb)));

  g.leaf_data("sigma_raw") = Tensor<double>::uniform(rays * samples, 1, 2.0, rng);
  Tensor<double> del(rays, samples);
  for (int64_t i = 0; i < rays * samples; ++i) del[size_t(i)] = rng.uniform(0.01, 0.2);
  g.bind("deltas", del);
  g.leaf_data("albedo") = Tensor<double>::uniform(rays * samples, 3, 0.5, rng);
  g.leaf_data("sun") = Tensor<double>::uniform(rays * samples, 1, 0.5, rng);
  g.leaf_data("ambient") = Tensor<double>::uniform(rays * samples, 3, 0.5, rng);

  CHECK(ssnf::testing::gradient_check(g, {"sigma_raw"}, "loss") < 1e-4);
}
