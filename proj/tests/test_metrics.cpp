#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "ssnf/metrics.hpp"
#include "ssnf/scene.hpp"

using namespace ssnf;
namespace fs = std::filesystem;

TEST_CASE("semantic accuracy closed forms") {
  std::vector<uint8_t> gt{0, 1, 2, 3};
  CHECK(semantic_accuracy(gt, gt) == 1.0);
  std::vector<uint8_t> half{0, 1, 0, 0};
  CHECK(semantic_accuracy(half, gt) == 0.5);
  std::vector<bool> ignore{false, false, true, true};
  CHECK(semantic_accuracy(half, gt, &ignore) == 1.0);
  std::vector<bool> all(4, true);
  CHECK_THROWS(semantic_accuracy(half, gt, &all));
  CHECK_THROWS(semantic_accuracy({0}, gt));
}

TEST_CASE("psnr closed forms") {
  std::vector<float> a(100, 0.5f);
  CHECK(std::isinf(psnr(a, a)));
  std::vector<float> b(100, 0.6f);  // constant error 0.1 -> 20 dB
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
  // halving the MSE adds 10 log10(2) = 3.0103 dB
  std::vector<float> half(100);
  for (size_t i = 0; i < 100; ++i) half[i] = i < 50 ? 0.5f : 0.6f;
  CHECK(psnr(a, half) == doctest::Approx(20.0 + 3.0103).epsilon(1e-4));
}

TEST_CASE("corrupt_labels: identity at zero loss, determinism, accuracy contract") {
  SceneSpec s = generate_scene(8, "town", 2, 48);
  RpcModel cam = make_affine_rpc({0, 0, -1}, s.grid, s.grid);
  FrameRecord f = oracle_render(s, cam, s.sun_dirs[0], 0);

  CorruptionConfig cfg;
  cfg.target_loss = 0;
  CHECK(corrupt_labels(f.labels, s.grid, s.grid, kNumClasses, cfg) == f.labels);

  cfg.target_loss = 0.2;
  cfg.seed = 4;
  auto c1 = corrupt_labels(f.labels, s.grid, s.grid, kNumClasses, cfg);
  auto c2 = corrupt_labels(f.labels, s.grid, s.grid, kNumClasses, cfg);
  CHECK(c1 == c2);
  const double acc = semantic_accuracy(c1, f.labels);
  CHECK(acc == doctest::Approx(0.8).epsilon(0.0125));

  // spatial coherence: no pixel-wise salt-and-pepper noise
  CHECK(mean_corruption_region_size(f.labels, c1, s.grid, s.grid) >= 10.0);

  // each changed pixel moves to the cyclically next class
  for (size_t i = 0; i < c1.size(); ++i)
    if (c1[i] != f.labels[i]) CHECK(c1[i] == (f.labels[i] + 1) % kNumClasses);
}

TEST_CASE("corrupt_labels skips tiny classes and handles absent ones") {
  std::vector<uint8_t> labels(48 * 48, 0);
  labels[0] = 4;  // a 1-pixel class stays intact
  CorruptionConfig cfg;
  cfg.target_loss = 0.1;
  cfg.seed = 1;
  auto out = corrupt_labels(labels, 48, 48, kNumClasses, cfg);
  CHECK(out[0] == 4);
  const double acc = semantic_accuracy(out, labels);
  CHECK(acc == doctest::Approx(0.9).epsilon(0.0125));
}

TEST_CASE("corrupt_dataset writes a sibling layout with per-frame noise") {
  SceneSpec s = generate_scene(12, "town", 5, 32);
  const auto clean_dir = fs::temp_directory_path() / "ssnf_metrics_clean";
  const auto noisy_dir = fs::temp_directory_path() / "ssnf_metrics_noisy";
  fs::remove_all(clean_dir);
  fs::remove_all(noisy_dir);
  export_dataset(s, clean_dir.string(), 5);
  CorruptionConfig cfg;
  cfg.target_loss = 0.2;
  cfg.seed = 3;
  corrupt_dataset(clean_dir.string(), noisy_dir.string(), cfg);

  Dataset clean = Dataset::load(clean_dir.string());
  Dataset noisy = Dataset::load(noisy_dir.string());
  REQUIRE(clean.frames.size() == noisy.frames.size());
  // train frames are corrupted with distinct noise, test frames untouched
  std::vector<std::vector<uint8_t>> train_noise;
  for (size_t i = 0; i < clean.frames.size(); ++i) {
    if (clean.frames[i].is_train) {
      CHECK(noisy.frames[i].labels != clean.frames[i].labels);
      CHECK(semantic_accuracy(noisy.frames[i].labels, clean.frames[i].labels) ==
            doctest::Approx(0.8).epsilon(0.0125));
      train_noise.push_back(noisy.frames[i].labels);
    } else {
      CHECK(noisy.frames[i].labels == clean.frames[i].labels);
    }
    CHECK(noisy.frames[i].rgb.data == clean.frames[i].rgb.data);
  }
  CHECK(train_noise[0] != train_noise[1]);  // per-frame noise fields differ
  fs::remove_all(clean_dir);
  fs::remove_all(noisy_dir);
}

namespace {

// dataset with two 4x4 nadir frames and hand-placed vehicle labels
Dataset manual_dataset() {
  Dataset d;
  d.width = d.height = 4;
  d.alt_min = -0.5;
  d.alt_max = 0.5;
  d.bounds = {{-1, -1, -0.5}, {1, 1, 0.5}};
  for (int i = 0; i < 2; ++i) {
    DatasetFrame f;
    f.name = "frame_000" + std::to_string(i);
    f.is_train = true;
    f.embed_index = i;
    f.sun = Vec3{0.1, 0.1, 1}.normalized();
    f.view = {0, 0, -1};
    f.rpc = make_affine_rpc({0, 0, -1}, 4, 4);
    f.rgb = ImageRgb8::make(4, 4);
    f.labels.assign(16, uint8_t(kGround));
    f.labels[5] = kVehicles;
    f.labels[10] = kVehicles;
    d.train_frames.push_back(int(d.frames.size()));
    d.frames.push_back(std::move(f));
  }
  return d;
}

FieldParams<float> constant_field(double sigma_bias, double beta_bias, int n_embeddings) {
  FieldConfig cfg = FieldConfig::desk();
  cfg.backbone_width = 8;
  cfg.semantic_hidden = 8;
  cfg.sun_hidden = 8;
  cfg.ambient_hidden = 4;
  cfg.beta_hidden = 4;
  cfg.pe_levels_position = 2;
  cfg.pe_levels_sun = 1;
  cfg.n_embeddings = n_embeddings;
  auto params = FieldParams<float>::init(cfg, 1);
  params.sigma_w.fill(0);
  params.sigma_b.fill(float(sigma_bias));
  params.beta_w_feat.fill(0);
  params.beta_w_embed.fill(0);
  params.beta_b1.fill(0);
  params.beta_w2.fill(0);
  params.beta_b2.fill(float(beta_bias));
  return params;
}

}  // namespace

TEST_CASE("transient_uncertainty: saturated opacity with forced beta") {
  Dataset d = manual_dataset();
  // sigma = 25 * softplus(12) ~ 300 per unit: fully opaque within one sample
  auto high = constant_field(12.0, 10.0, 2);  // softplus(10) ~ 10: beta >> 1 clamps metric? no: metric is just the weighted mean
  // force beta exactly 1: softplus(x) = 1 -> x = ln(e - 1)
  high.beta_b2.fill(float(std::log(std::exp(1.0) - 1.0)));
  const double tu1 = transient_uncertainty(high, d, 32, 1);
  CHECK(tu1 == doctest::Approx(1.0).epsilon(1e-3));

  auto low = constant_field(12.0, -30.0, 2);  // softplus(-30) ~ 0
  const double tu0 = transient_uncertainty(low, d, 32, 1);
  CHECK(tu0 == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("transient_uncertainty matches the analytic weighted mean") {
  Dataset d = manual_dataset();
  // constant sigma over the volume: beta_agg = beta * (1 - exp(-sigma * span))
  const double raw = -2.0;
  auto params = constant_field(raw, std::log(std::exp(0.5) - 1.0), 2);  // beta = 0.5
  const double sigma = 25.0 * std::log1p(std::exp(raw));
  const double span = 1.0;  // alt_max - alt_min for a nadir ray
  const double expect = 0.5 * (1.0 - std::exp(-sigma * span));
  const double tu = transient_uncertainty(params, d, 64, 1);
  CHECK(tu == doctest::Approx(expect).epsilon(1e-3));
}

TEST_CASE("transient_uncertainty requires transient pixels") {
  Dataset d = manual_dataset();
  for (auto& f : d.frames) std::fill(f.labels.begin(), f.labels.end(), uint8_t(kGround));
  auto params = constant_field(1.0, 0.0, 2);
  CHECK_THROWS(transient_uncertainty(params, d, 16, 1));
}

TEST_CASE("fuse_labels reporting is idempotent and sane for a random field") {
  SceneSpec s = generate_scene(19, "town", 5, 24);
  const auto clean_dir = fs::temp_directory_path() / "ssnf_fuse_clean";
  const auto noisy_dir = fs::temp_directory_path() / "ssnf_fuse_noisy";
  fs::remove_all(clean_dir);
  fs::remove_all(noisy_dir);
  export_dataset(s, clean_dir.string(), 5);
  CorruptionConfig ccfg;
  ccfg.target_loss = 0.2;
  ccfg.seed = 2;
  corrupt_dataset(clean_dir.string(), noisy_dir.string(), ccfg);
  Dataset clean = Dataset::load(clean_dir.string());
  Dataset noisy = Dataset::load(noisy_dir.string());

  FieldConfig fc = FieldConfig::desk();
  fc.backbone_width = 16;
  fc.semantic_hidden = 8;
  fc.sun_hidden = 8;
  fc.ambient_hidden = 4;
  fc.beta_hidden = 8;
  fc.n_embeddings = clean.n_train();
  auto params = FieldParams<float>::init(fc, 5);

  FusionReport a = fuse_labels(params, noisy, clean, 16, 2);
  FusionReport b = fuse_labels(params, noisy, clean, 16, 2);
  CHECK(a.input_mean == b.input_mean);
  CHECK(a.fused_mean == b.fused_mean);
  CHECK(a.input_mean == doctest::Approx(0.8).epsilon(0.02));
  // an untrained field cannot beat strong priors; just bound it by chance level
  CHECK(a.fused_mean < 0.7);
  CHECK(a.delta == doctest::Approx(a.fused_mean - a.input_mean));
  fs::remove_all(clean_dir);
  fs::remove_all(noisy_dir);
}
