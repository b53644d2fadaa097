#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssnf/checkpoint.hpp"
#include "ssnf/colormap.hpp"
#include "ssnf/config.hpp"
#include "ssnf/dataset.hpp"
#include "ssnf/manifest.hpp"
#include "ssnf/metrics.hpp"
#include "ssnf/params_io.hpp"
#include "ssnf/scene.hpp"
#include "ssnf/selfcheck.hpp"
#include "ssnf/trainer.hpp"

namespace fs = std::filesystem;
using namespace ssnf;

namespace {

struct SynthArgs {
  std::string preset = "town";
  uint64_t seed = 0;
  int views = 10;
  int size = 48;
  int split_every = 5;
  bool no_vehicles = false;
  std::string out;
};

struct TrainArgs {
  std::string data, out, config_file, preset = "desk", resume;
  int64_t iters = -1;
  int batch = -1, samples = -1, threads = -1, chunks = -1;
  double lr = -1, lr_decay = -1;
  int64_t seed = -1;
  int64_t checkpoint_interval = -1, log_interval = -1;
  bool no_treg = false, no_solar = false, no_depth = false;
  std::string semantic_activation;
};

struct RenderArgs {
  std::string ckpt, data, modality = "all", out = "render";
  int frame = -1;
  int embed = 0;
  int threads = 2;
  double view_azimuth = 0, view_zenith = -1;  // zenith >= 0 selects a novel view
  double sun_azimuth = 90, sun_elevation = 50;
};

struct EvalArgs {
  std::string ckpt, data, split = "test", metric = "accuracy", ref_data, report;
  bool transient_free = false;
  int threads = 2;
};

struct CorruptArgs {
  std::string labels, out;
  double loss = 0.2;
  uint64_t seed = 0;
  int blur = 1, rescale = 4;
};

struct FuseArgs {
  std::string ckpt, data, clean, report;
  int threads = 2;
};

RunConfig resolve_train_config(const TrainArgs& a) {
  RunConfig cfg = a.preset == "paper" ? RunConfig() : RunConfig::desk();
  if (!a.config_file.empty()) cfg = RunConfig::load_file(a.config_file, cfg);
  cfg.data_dir = a.data;
  cfg.out_dir = a.out;
  if (a.iters >= 0) cfg.iterations = a.iters;
  if (a.batch > 0) cfg.batch = a.batch;
  if (a.samples > 0) cfg.samples = a.samples;
  if (a.lr > 0) cfg.lr = a.lr;
  if (a.lr_decay > 0) cfg.lr_decay = a.lr_decay;
  if (a.seed >= 0) cfg.seed = uint64_t(a.seed);
  if (a.threads > 0) cfg.threads = a.threads;
  if (a.chunks > 0) cfg.grad_chunks = a.chunks;
  if (a.checkpoint_interval > 0) cfg.checkpoint_interval = a.checkpoint_interval;
  if (a.log_interval > 0) cfg.log_interval = a.log_interval;
  if (a.no_treg) cfg.enable_transient_reg = false;
  if (a.no_solar) cfg.enable_solar = false;
  if (a.no_depth) cfg.enable_depth = false;
  if (a.semantic_activation == "sigmoid")
    cfg.field.semantic_activation = SemanticActivation::kSigmoid;
  else if (a.semantic_activation == "none")
    cfg.field.semantic_activation = SemanticActivation::kNone;
  else if (!a.semantic_activation.empty())
    throw std::invalid_argument("--semantic-activation must be sigmoid or none");
  return cfg;
}

void save_gray(const std::string& path, int w, int h, const std::vector<float>& v,
               bool normalize = false) {
  std::vector<uint8_t> gray(v.size());
  float lo = 0, hi = 1;
  if (normalize) {
    lo = v[0];
    hi = v[0];
    for (float x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    if (hi <= lo) hi = lo + 1;
  }
  for (size_t i = 0; i < v.size(); ++i) gray[i] = quantize8((v[i] - lo) / (hi - lo));
  write_png_gray8(path, w, h, gray);
}

void write_render_outputs(const ViewRender& r, const std::string& prefix,
                          const std::string& modality) {
  const auto palette = class_palette();
  auto want = [&](const char* m) { return modality == "all" || modality == m; };
  if (want("rgb")) {
    ImageRgb8 img = ImageRgb8::make(r.width, r.height);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = quantize8(r.rgb[i]);
    write_png_rgb8(prefix + "_rgb.png", img);
  }
  if (want("semantic")) {
    write_png_palette(prefix + "_semantic.png", r.width, r.height, r.sem_class, palette);
    ImageRgb8 img = ImageRgb8::make(r.width, r.height);
    for (int64_t i = 0; i < int64_t(r.sem_class.size()); ++i)
      for (int c = 0; c < 3; ++c)
        img.data[size_t(i * 3 + c)] = palette[r.sem_class[size_t(i)]][size_t(c)];
    write_png_rgb8(prefix + "_semantic_rgb.png", img);
  }
  if (want("sun")) save_gray(prefix + "_sun.png", r.width, r.height, r.sun_agg);
  if (want("uncertainty")) save_gray(prefix + "_uncertainty.png", r.width, r.height, r.beta_agg);
  if (want("depth")) save_gray(prefix + "_depth.png", r.width, r.height, r.depth, true);
  if (want("semantic_shaded")) {
    ImageRgb8 img = ImageRgb8::make(r.width, r.height);
    for (int64_t i = 0; i < int64_t(r.sem_class.size()); ++i)
      for (int c = 0; c < 3; ++c)
        img.data[size_t(i * 3 + c)] =
            quantize8(palette[r.sem_class[size_t(i)]][size_t(c)] / 255.0 *
                      double(r.sun_agg[size_t(i)]));
    write_png_rgb8(prefix + "_semantic_shaded.png", img);
  }
}

void write_report(const std::string& path, const std::string& content) {
  std::cout << content;
  if (path.empty()) return;
  fs::create_directories(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path().string());
  std::ofstream out(path);
  out << content;
}

int cmd_synth(const SynthArgs& a) {
  SceneSpec scene = generate_scene(a.seed, a.preset, a.views, a.size, !a.no_vehicles);
  export_dataset(scene, a.out, a.split_every);
  std::cout << "dataset written to " << a.out << " (" << a.views << " views, " << a.size << "x"
            << a.size << ")\n";
  return 0;
}

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = resolve_train_config(a);
  cfg.validate();
  Dataset data = Dataset::load(cfg.data_dir);
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream cf(fs::path(cfg.out_dir) / "config.json");
    cf << cfg.to_json_string() << "\n";
  }
  Trainer trainer(data, cfg);
  if (!a.resume.empty())
    trainer.resume_from(Checkpoint::load(a.resume));
  else
    trainer.initialize();
  trainer.run();
  std::cout << "checkpoint=" << trainer.checkpoint_path() << "\n"
            << "metrics_log=" << trainer.metrics_log_path() << "\n";
  return 0;
}

int cmd_render(const RenderArgs& a) {
  Checkpoint ck = Checkpoint::load(a.ckpt);
  RunConfig cfg;
  FieldParams<float> params = load_field_params(ck, &cfg);
  Dataset data = Dataset::load(a.data);
  ViewRender r;
  if (a.view_zenith >= 0) {
    const double zen = a.view_zenith * M_PI / 180.0, az = a.view_azimuth * M_PI / 180.0;
    const Vec3 view{-std::sin(zen) * std::cos(az), -std::sin(zen) * std::sin(az), -std::cos(zen)};
    const double el = a.sun_elevation * M_PI / 180.0, saz = a.sun_azimuth * M_PI / 180.0;
    const Vec3 sun{std::cos(el) * std::cos(saz), std::cos(el) * std::sin(saz), std::sin(el)};
    RpcModel camera = make_affine_rpc(view, data.width, data.height);
    r = render_view(params, data, camera, sun, a.embed, cfg.samples, a.threads);
  } else {
    if (a.frame < 0 || a.frame >= int(data.frames.size()))
      throw std::invalid_argument("render: --frame index out of range");
    r = render_frame(params, data, a.frame, cfg.samples, a.threads);
  }
  write_render_outputs(r, a.out, a.modality);
  std::cout << "rendered modality=" << a.modality << " out=" << a.out << "_*.png\n";
  return 0;
}

int cmd_eval(const EvalArgs& a) {
  Checkpoint ck = Checkpoint::load(a.ckpt);
  RunConfig cfg;
  FieldParams<float> params = load_field_params(ck, &cfg);
  Dataset data = Dataset::load(a.data);
  std::string report;
  char buf[160];
  if (a.metric == "accuracy" || a.metric == "all") {
    AccuracyReport rep = evaluate_semantic_accuracy(params, data, a.split, a.transient_free,
                                                    cfg.samples, a.threads);
    report += rep.to_key_values();
  }
  if (a.metric == "transient" || a.metric == "all") {
    if (a.split != "train")
      throw std::invalid_argument("transient uncertainty is defined on the train split only");
    const double tu = transient_uncertainty(params, data, cfg.samples, a.threads);
    std::snprintf(buf, sizeof(buf), "transient_uncertainty=%.6f\n", tu);
    report += buf;
  }
  if (a.metric == "psnr" || a.metric == "all") {
    const Dataset* ref = &data;
    Dataset ref_data;
    if (!a.ref_data.empty()) {
      ref_data = Dataset::load(a.ref_data);
      ref = &ref_data;
    }
    const auto& idx = a.split == "train" ? data.train_frames : data.test_frames;
    double mean = 0;
    for (int f : idx) {
      ViewRender r = render_frame(params, data, f, cfg.samples, a.threads);
      const ImageRgb8& gt = ref->frames[size_t(f)].rgb;
      std::vector<float> gtf(gt.data.size());
      for (size_t i = 0; i < gt.data.size(); ++i) gtf[i] = float(gt.data[i]) / 255.f;
      const double p = psnr(r.rgb, gtf);
      std::snprintf(buf, sizeof(buf), "psnr_%s=%.4f\n", data.frames[size_t(f)].name.c_str(), p);
      report += buf;
      mean += p;
    }
    std::snprintf(buf, sizeof(buf), "psnr_mean=%.4f\n", mean / double(idx.size()));
    report += buf;
  }
  if (report.empty()) throw std::invalid_argument("unknown metric: " + a.metric);
  write_report(a.report, report);
  return 0;
}

int cmd_corrupt(const CorruptArgs& a) {
  CorruptionConfig cfg;
  cfg.target_loss = a.loss;
  cfg.seed = a.seed;
  cfg.blur_radius = a.blur;
  cfg.rescale = a.rescale;
  corrupt_dataset(a.labels, a.out, cfg);
  // measure achieved accuracy of the corrupted training labels
  Dataset clean = Dataset::load(a.labels);
  Dataset noisy = Dataset::load(a.out);
  double mean = 0;
  for (size_t i = 0; i < clean.train_frames.size(); ++i)
    mean += semantic_accuracy(noisy.frames[size_t(noisy.train_frames[i])].labels,
                              clean.frames[size_t(clean.train_frames[i])].labels);
  mean /= double(clean.train_frames.size());
  char buf[96];
  std::snprintf(buf, sizeof(buf), "corrupted_accuracy=%.6f\n", mean);
  std::string report = buf;
  write_report((fs::path(a.out) / "corruption_report.txt").string(), report);
  return 0;
}

int cmd_fuse(const FuseArgs& a) {
  Checkpoint ck = Checkpoint::load(a.ckpt);
  RunConfig cfg;
  FieldParams<float> params = load_field_params(ck, &cfg);
  Dataset noisy = Dataset::load(a.data);
  Dataset clean = Dataset::load(a.clean);
  FusionReport rep = fuse_labels(params, noisy, clean, cfg.samples, a.threads);
  write_report(a.report, rep.to_key_values());
  return 0;
}

int cmd_selftest(int criterion, const std::string& log, const std::string& report) {
  CheckResult res;
  switch (criterion) {
    case 1: res = check_autodiff_gradients(); break;
    case 2: res = check_compositing_invariants(); break;
    case 3: res = check_loss_closed_forms(); break;
    case 4: res = check_rpc_round_trip(); break;
    case 8: res = check_corruption_contract(); break;
    case 9:
      if (log.empty()) throw std::invalid_argument("selftest 9 needs --log <metrics.log>");
      res = check_schedule_log(log);
      break;
    default: throw std::invalid_argument("selftest criterion must be one of 1,2,3,4,8,9");
  }
  char buf[640];
  std::snprintf(buf, sizeof(buf), "passed=%d\ndetail=%s\n", res.passed ? 1 : 0,
                res.detail.c_str());
  write_report(report, buf);
  return res.passed ? 0 : 1;
}

int cmd_manifest(const std::string& file, const std::string& work, const std::string& self) {
  ExperimentManifest m = ExperimentManifest::load(file);
  ManifestResult res = run_manifest(m, self, work);
  for (const auto& line : res.log) std::cout << "  " << line << "\n";
  std::cout << (res.passed ? "[PASS] " : "[FAIL] ") << m.name << "\n";
  return res.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semantic satellite neural field toolkit"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-date dataset");
  synth->add_option("--preset", sa.preset, "flat | town | parking_lot");
  synth->add_option("--seed", sa.seed, "generation seed");
  synth->add_option("--views", sa.views, "number of views/dates");
  synth->add_option("--size", sa.size, "frame size in pixels");
  synth->add_option("--split-every", sa.split_every, "every n-th view becomes a test view");
  synth->add_flag("--no-vehicles", sa.no_vehicles, "strip vehicle decals");
  synth->add_option("--out", sa.out, "output dataset directory")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a field on a dataset");
  train->add_option("--data", ta.data, "dataset directory")->required();
  train->add_option("--out", ta.out, "run output directory")->required();
  train->add_option("--config", ta.config_file, "JSON config file");
  train->add_option("--preset", ta.preset, "desk | paper");
  train->add_option("--resume", ta.resume, "checkpoint to resume from");
  train->add_option("--iters", ta.iters, "total iterations");
  train->add_option("--batch", ta.batch, "rays per iteration");
  train->add_option("--samples", ta.samples, "samples per ray");
  train->add_option("--lr", ta.lr, "base learning rate");
  train->add_option("--lr-decay", ta.lr_decay, "per-epoch decay factor");
  train->add_option("--seed", ta.seed, "training seed");
  train->add_option("--threads", ta.threads, "worker threads");
  train->add_option("--chunks", ta.chunks, "gradient micro-batches");
  train->add_option("--checkpoint-interval", ta.checkpoint_interval, "iterations per checkpoint");
  train->add_option("--log-interval", ta.log_interval, "iterations per metrics line");
  train->add_flag("--no-transient-reg", ta.no_treg, "disable the transient regularization");
  train->add_flag("--no-solar", ta.no_solar, "disable solar correction rays");
  train->add_flag("--no-depth", ta.no_depth, "disable depth supervision");
  train->add_option("--semantic-activation", ta.semantic_activation, "sigmoid | none");

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "render a view from a checkpoint");
  render->add_option("--ckpt", ra.ckpt, "checkpoint file")->required();
  render->add_option("--data", ra.data, "dataset directory (cameras and bounds)")->required();
  render->add_option("--frame", ra.frame, "dataset frame index");
  render->add_option("--view-zenith", ra.view_zenith, "novel view zenith (degrees)");
  render->add_option("--view-azimuth", ra.view_azimuth, "novel view azimuth (degrees)");
  render->add_option("--sun-elevation", ra.sun_elevation, "novel sun elevation (degrees)");
  render->add_option("--sun-azimuth", ra.sun_azimuth, "novel sun azimuth (degrees)");
  render->add_option("--modality", ra.modality,
                     "rgb | semantic | sun | uncertainty | depth | semantic_shaded | all");
  render->add_option("--embed", ra.embed, "embedding row for novel views");
  render->add_option("--threads", ra.threads, "render threads");
  render->add_option("--out", ra.out, "output file prefix");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", ea.ckpt, "checkpoint file")->required();
  eval->add_option("--data", ea.data, "dataset directory")->required();
  eval->add_option("--split", ea.split, "train | test");
  eval->add_option("--metric", ea.metric, "accuracy | transient | psnr | all");
  eval->add_flag("--transient-free", ea.transient_free,
                 "score against transient-free ground truth");
  eval->add_option("--ref-data", ea.ref_data, "reference dataset for psnr");
  eval->add_option("--report", ea.report, "report file (key=value lines)");
  eval->add_option("--threads", ea.threads, "render threads");

  CorruptArgs ca;
  auto* corrupt = app.add_subcommand("corrupt", "corrupt training labels");
  corrupt->add_option("--labels", ca.labels, "input dataset directory")->required();
  corrupt->add_option("--loss", ca.loss, "target accuracy loss in [0,1)");
  corrupt->add_option("--seed", ca.seed, "corruption seed");
  corrupt->add_option("--blur", ca.blur, "noise blur radius");
  corrupt->add_option("--rescale", ca.rescale, "noise grid cell size");
  corrupt->add_option("--out", ca.out, "output dataset directory")->required();

  FuseArgs fa;
  auto* fuse = app.add_subcommand("fuse", "multi-view label fusion report");
  fuse->add_option("--ckpt", fa.ckpt, "checkpoint trained on --data")->required();
  fuse->add_option("--data", fa.data, "training dataset (possibly corrupted)")->required();
  fuse->add_option("--clean", fa.clean, "clean ground-truth dataset")->required();
  fuse->add_option("--report", fa.report, "report file");
  fuse->add_option("--threads", fa.threads, "render threads");

  std::string manifest_file, manifest_work = "manifest_work";
  auto* manifest = app.add_subcommand("manifest", "run an experiment manifest");
  manifest->add_option("file", manifest_file, "manifest JSON file")->required();
  manifest->add_option("--work", manifest_work, "working directory");

  int st_criterion = 0;
  std::string st_log, st_report;
  auto* selftest = app.add_subcommand("selftest", "run a built-in property suite");
  selftest->add_option("--criterion", st_criterion, "1 autodiff | 2 compositing | 3 losses | 4 rpc | 8 corruption | 9 schedule")
      ->required();
  selftest->add_option("--log", st_log, "metrics log (criterion 9)");
  selftest->add_option("--report", st_report, "report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(synth)) return cmd_synth(sa);
    if (app.got_subcommand(train)) return cmd_train(ta);
    if (app.got_subcommand(render)) return cmd_render(ra);
    if (app.got_subcommand(eval)) return cmd_eval(ea);
    if (app.got_subcommand(corrupt)) return cmd_corrupt(ca);
    if (app.got_subcommand(fuse)) return cmd_fuse(fa);
    if (app.got_subcommand(selftest)) return cmd_selftest(st_criterion, st_log, st_report);
    if (app.got_subcommand(manifest)) return cmd_manifest(manifest_file, manifest_work, argv[0]);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
