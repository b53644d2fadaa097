#include "ssnf/trainer.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "ssnf/render.hpp"
#include "ssnf/rng.hpp"

namespace ssnf {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- sampler

BatchSampler::BatchSampler(const Dataset& data, int batch, uint64_t seed)
    : batch_(batch), seed_(seed) {
  for (int f : data.train_frames)
    for (int p = 0; p < data.width * data.height; ++p) all_rays_.push_back({f, p});
  if (all_rays_.empty()) throw std::invalid_argument("BatchSampler: dataset has no training rays");
  if (int64_t(all_rays_.size()) % batch != 0)
    throw std::invalid_argument(
        "BatchSampler: training ray count " + std::to_string(all_rays_.size()) +
        " must be divisible by the batch size " + std::to_string(batch));
  iters_per_epoch_ = int64_t(all_rays_.size()) / batch;
}

const std::vector<RayRef>& BatchSampler::permutation(int64_t epoch_index) const {
  if (cached_epoch_ != epoch_index) {
    cached_perm_ = all_rays_;
    Rng rng(seed_, stream::kEpochPerm, uint64_t(epoch_index));
    rng.shuffle(cached_perm_);
    cached_epoch_ = epoch_index;
  }
  return cached_perm_;
}

std::vector<RayRef> BatchSampler::batch(int64_t iteration) const {
  const int64_t epoch_index = iteration / iters_per_epoch_;
  const int64_t offset = (iteration % iters_per_epoch_) * batch_;
  const auto& perm = permutation(epoch_index);
  return {perm.begin() + offset, perm.begin() + offset + batch_};
}

// ------------------------------------------------------------- rendering

namespace {

std::vector<float> encode_direction(const Vec3& w, const FieldConfig& cfg) {
  const float raw[3] = {float(w.x), float(w.y), float(w.z)};
  std::vector<float> out(size_t(cfg.sun_input_dim()));
  if (cfg.encode_sun)
    positional_encode(raw, 3, cfg.pe_levels_sun, out.data());
  else
    out.assign(raw, raw + 3);
  return out;
}

}  // namespace

ViewRender render_view(const FieldParams<float>& params, const Dataset& data,
                       const RpcModel& camera, const Vec3& sun_dir, int embed_index, int samples,
                       int threads) {
  const FieldConfig& cfg = params.config;
  const int w = data.width, h = data.height, n = samples;
  const int64_t m = int64_t(w) * h * n;
  const Vec3 sun = sun_dir.normalized();

  Tensor<float> pe_x(m, cfg.position_input_dim());
  Tensor<float> pe_w(m, cfg.sun_input_dim());
  std::vector<int> embed_rows(size_t(m), embed_index);
  Tensor<float> tvals(int64_t(w) * h, n), deltas(int64_t(w) * h, n);
  const std::vector<float> sun_enc = encode_direction(sun, cfg);

  const int rows_per_job = std::max(1, h / std::max(1, threads));
  std::vector<std::thread> jobs;
  std::atomic<int> next_row{0};
  auto fill = [&]() {
    Rng dummy(0);
    for (;;) {
      const int r0 = next_row.fetch_add(rows_per_job);
      if (r0 >= h) return;
      for (int r = r0; r < std::min(h, r0 + rows_per_job); ++r)
        for (int c = 0; c < w; ++c) {
          const int64_t px = int64_t(r) * w + c;
          Ray ray = build_ray(camera, r, c, data.alt_min, data.alt_max);
          SampleSet s = sample_along_ray(ray, n, false, dummy);
          for (int i = 0; i < n; ++i) {
            const Vec3 pn = world_normalize(s.position[size_t(i)], data.bounds);
            const float p[3] = {float(pn.x), float(pn.y), float(pn.z)};
            positional_encode(p, 3, cfg.pe_levels_position,
                              pe_x.data() + (px * n + i) * pe_x.cols());
            std::copy(sun_enc.begin(), sun_enc.end(), pe_w.data() + (px * n + i) * pe_w.cols());
            tvals.at(px, i) = float(s.t[size_t(i)]);
            deltas.at(px, i) = float(s.delta[size_t(i)]);
          }
        }
    }
  };
  for (int t = 0; t < std::max(1, threads); ++t) jobs.emplace_back(fill);
  for (auto& j : jobs) j.join();

  FieldBatch<float> fb = field_forward(params, pe_x, pe_w, embed_rows);

  ViewRender out;
  out.width = w;
  out.height = h;
  out.n_classes = cfg.n_classes;
  out.rgb.resize(size_t(w) * h * 3);
  out.sem_class.resize(size_t(w) * h);
  out.sem_probs.resize(size_t(w) * h * size_t(cfg.n_classes));
  out.sun_agg.resize(size_t(w) * h);
  out.beta_agg.resize(size_t(w) * h);
  out.depth.resize(size_t(w) * h);
  out.opacity.resize(size_t(w) * h);

  const auto un = static_cast<size_t>(n);
  std::vector<float> sig(un), del(un), sunv(un), beta(un), tv(un);
  std::vector<std::array<float, 3>> alb(un), amb(un);
  std::vector<std::vector<float>> sem(un, std::vector<float>(size_t(cfg.n_classes)));
  for (int64_t px = 0; px < int64_t(w) * h; ++px) {
    for (int i = 0; i < n; ++i) {
      const int64_t k = px * n + i;
      sig[size_t(i)] = fb.sigma[size_t(k)];
      del[size_t(i)] = deltas[size_t(k)];
      sunv[size_t(i)] = fb.sun[size_t(k)];
      beta[size_t(i)] = fb.beta[size_t(k)];
      tv[size_t(i)] = tvals[size_t(k)];
      for (int ch = 0; ch < 3; ++ch) {
        alb[size_t(i)][size_t(ch)] = fb.albedo.at(k, ch);
        amb[size_t(i)][size_t(ch)] = fb.ambient.at(k, ch);
      }
      for (int ch = 0; ch < cfg.n_classes; ++ch) sem[size_t(i)][size_t(ch)] = fb.sem.at(k, ch);
    }
    auto cw = compositing_weights(sig, del);
    const auto rgb = render_color(cw, alb, sunv, amb);
    for (int ch = 0; ch < 3; ++ch) out.rgb[size_t(px * 3 + ch)] = rgb[size_t(ch)];
    const auto sr = render_semantic(cw, sem);
    out.sem_class[size_t(px)] = uint8_t(sr.cls);
    for (int ch = 0; ch < cfg.n_classes; ++ch)
      out.sem_probs[size_t(px) * size_t(cfg.n_classes) + size_t(ch)] = sr.probs[size_t(ch)];
    out.sun_agg[size_t(px)] = render_scalar(cw, sunv);
    out.beta_agg[size_t(px)] = render_scalar(cw, beta);
    out.depth[size_t(px)] = render_scalar(cw, tv);
    out.opacity[size_t(px)] = cw.opacity;
  }
  return out;
}

ViewRender render_frame(const FieldParams<float>& params, const Dataset& data, int frame_index,
                        int samples, int threads) {
  const DatasetFrame& f = data.frames.at(size_t(frame_index));
  const int embed = f.embed_index >= 0 ? f.embed_index : 0;
  return render_view(params, data, f.rpc, f.sun, embed, samples, threads);
}

// --------------------------------------------------------------- trainer

struct Trainer::ChunkContext {
  Graph<float> graph;
  int rays = 0;
  std::map<std::string, Tensor<float>> grads;
  double raw_l2 = 0, raw_unc = 0, raw_sem = 0, raw_treg = 0, opacity_sum = 0;
};

Trainer::Trainer(const Dataset& data, const RunConfig& config)
    : data_(data), cfg_(config), sampler_(data, config.batch, config.seed) {
  cfg_.validate();
  field_cfg_ = cfg_.field;
  field_cfg_.n_embeddings = std::max(1, data_.n_train());
  schedule_.plain_color_epochs = cfg_.plain_color_epochs;
  schedule_.transient_reg_start_epoch = cfg_.treg_start_epoch;
  schedule_.depth_supervision_fraction = cfg_.depth_fraction;
  schedule_.iterations_per_epoch = sampler_.iterations_per_epoch();
  schedule_.validate();

  rays_.resize(data_.frames.size());
  for (size_t f = 0; f < data_.frames.size(); ++f) {
    rays_[f].reserve(size_t(data_.width) * size_t(data_.height));
    for (int r = 0; r < data_.height; ++r)
      for (int c = 0; c < data_.width; ++c)
        rays_[f].push_back(build_ray(data_.frames[f].rpc, r, c, data_.alt_min, data_.alt_max));
    sun_encoded_.push_back(encode_direction(data_.frames[f].sun, field_cfg_));
  }
  for (int f : data_.train_frames)
    for (const auto& s : data_.frames[size_t(f)].depth) depth_pool_.push_back({f, s});

  const int chunk_rays = cfg_.batch / cfg_.grad_chunks;
  for (int k = 0; k < cfg_.grad_chunks; ++k) {
    auto ctx = std::make_unique<ChunkContext>();
    ctx->rays = chunk_rays;
    ctx->graph = build_train_graph<float>(field_cfg_, chunk_rays, cfg_.samples, cfg_.loss);
    ctx->graph.set_check_finite(false);
    chunks_.push_back(std::move(ctx));
  }
  if (cfg_.enable_depth && !depth_pool_.empty()) {
    depth_graph_ = std::make_unique<Graph<float>>(
        build_depth_graph<float>(field_cfg_, cfg_.depth_rays, cfg_.samples));
    depth_graph_->set_check_finite(false);
  }
  if (cfg_.enable_solar) {
    solar_graph_ = std::make_unique<Graph<float>>(
        build_solar_graph<float>(field_cfg_, cfg_.solar_rays, cfg_.samples));
    solar_graph_->set_check_finite(false);
  }
}

Trainer::~Trainer() = default;

void Trainer::initialize() {
  params_ = std::make_unique<FieldParams<float>>(FieldParams<float>::init(field_cfg_, cfg_.seed));
  auto list = params_->list();
  adam_ = std::make_unique<AdamState<float>>(AdamState<float>::init(list));
  iteration_ = 0;
}

void Trainer::resume_from(const Checkpoint& ck) {
  if (ck.config_hash != cfg_.hash())
    throw std::runtime_error("resume: checkpoint config hash does not match this config");
  initialize();
  ck.restore_params(*params_);
  ck.restore_adam(*adam_);
  iteration_ = ck.iteration;
}

std::string Trainer::checkpoint_path() const {
  return (fs::path(cfg_.out_dir) / "checkpoint.ssck").string();
}
std::string Trainer::metrics_log_path() const {
  return (fs::path(cfg_.out_dir) / "metrics.log").string();
}

Checkpoint Trainer::snapshot() const { return snapshot_at(iteration_); }

Checkpoint Trainer::snapshot_at(int64_t iteration) const {
  return Checkpoint::capture(*params_, *adam_, cfg_.hash(), cfg_.to_json_string(), cfg_.seed,
                             sampler_.epoch_of(iteration > 0 ? iteration - 1 : 0), iteration,
                             cfg_.iterations);
}

void Trainer::save_checkpoint_at(int64_t iteration) const {
  fs::create_directories(cfg_.out_dir);
  snapshot_at(iteration).save(checkpoint_path());
}

void Trainer::fill_main_inputs(ChunkContext& ctx, const std::vector<RayRef>& rays, int chunk,
                               int64_t it) {
  Graph<float>& g = ctx.graph;
  Tensor<float>& pe_x = g.leaf_data(pipe::kPeX);
  Tensor<float>& pe_w = g.leaf_data(pipe::kPeW);
  Tensor<float>& embed = g.leaf_data(pipe::kEmbedSel);
  Tensor<float>& deltas = g.leaf_data(pipe::kDeltas);
  Tensor<float>& tvals = g.leaf_data(pipe::kTVals);
  Tensor<float>& gt_rgb = g.leaf_data(pipe::kGtRgb);
  Tensor<float>& gt_sem = g.leaf_data(pipe::kGtSem);
  Tensor<float>& smask = g.leaf_data(pipe::kStaticMask);
  Tensor<float>& tmask = g.leaf_data(pipe::kTransientMask);
  embed.fill(0);
  gt_sem.fill(0);

  const int n = cfg_.samples;
  for (int i = 0; i < ctx.rays; ++i) {
    const int64_t slot = int64_t(chunk) * ctx.rays + i;
    const RayRef rr = rays[size_t(slot)];
    const DatasetFrame& frame = data_.frames[size_t(rr.frame)];
    const Ray& ray = rays_[size_t(rr.frame)][size_t(rr.pixel)];
    Rng jitter(cfg_.seed, stream::kJitter, uint64_t(it) * uint64_t(cfg_.batch) + uint64_t(slot));
    SampleSet s = sample_along_ray(ray, n, true, jitter);
    for (int k = 0; k < n; ++k) {
      const int64_t row = int64_t(i) * n + k;
      const Vec3 pn = world_normalize(s.position[size_t(k)], data_.bounds);
      const float p[3] = {float(pn.x), float(pn.y), float(pn.z)};
      positional_encode(p, 3, field_cfg_.pe_levels_position, pe_x.data() + row * pe_x.cols());
      const auto& senc = sun_encoded_[size_t(rr.frame)];
      std::copy(senc.begin(), senc.end(), pe_w.data() + row * pe_w.cols());
      embed.at(row, frame.embed_index) = 1.f;
      deltas.at(i, k) = float(s.delta[size_t(k)]);
      tvals.at(i, k) = float(s.t[size_t(k)]);
    }
    const uint8_t* px = frame.rgb.px(rr.pixel / data_.width, rr.pixel % data_.width);
    for (int ch = 0; ch < 3; ++ch) gt_rgb.at(i, ch) = float(px[ch]) / 255.f;
    const uint8_t label = frame.labels[size_t(rr.pixel)];
    gt_sem.at(i, label) = 1.f;
    const bool transient = int(label) == data_.transient_class;
    smask.at(i, 0) = transient ? 0.f : 1.f;
    tmask.at(i, 0) = transient ? 1.f : 0.f;
  }
}

void Trainer::run_depth_graph(int64_t it, std::vector<Tensor<float>>& grads, double& raw) {
  Graph<float>& g = *depth_graph_;
  Tensor<float>& pe_x = g.leaf_data(pipe::kPeX);
  Tensor<float>& pe_w = g.leaf_data(pipe::kPeW);
  Tensor<float>& embed = g.leaf_data(pipe::kEmbedSel);
  Tensor<float>& deltas = g.leaf_data(pipe::kDeltas);
  Tensor<float>& tvals = g.leaf_data(pipe::kTVals);
  Tensor<float>& gt_depth = g.leaf_data(pipe::kGtDepth);
  Tensor<float>& valid = g.leaf_data(pipe::kDepthValid);
  embed.fill(0);

  Rng rng(cfg_.seed, stream::kDepth, uint64_t(it));
  const int n = cfg_.samples;
  for (int i = 0; i < cfg_.depth_rays; ++i) {
    const auto& [f, sample] = depth_pool_[size_t(rng.next_below(depth_pool_.size()))];
    const DatasetFrame& frame = data_.frames[size_t(f)];
    const Ray& ray = rays_[size_t(f)][size_t(sample.row * data_.width + sample.col)];
    SampleSet s = sample_along_ray(ray, n, true, rng);
    for (int k = 0; k < n; ++k) {
      const int64_t row = int64_t(i) * n + k;
      const Vec3 pn = world_normalize(s.position[size_t(k)], data_.bounds);
      const float p[3] = {float(pn.x), float(pn.y), float(pn.z)};
      positional_encode(p, 3, field_cfg_.pe_levels_position, pe_x.data() + row * pe_x.cols());
      const auto& senc = sun_encoded_[size_t(f)];
      std::copy(senc.begin(), senc.end(), pe_w.data() + row * pe_w.cols());
      embed.at(row, std::max(0, frame.embed_index)) = 1.f;
      deltas.at(i, k) = float(s.delta[size_t(k)]);
      tvals.at(i, k) = float(s.t[size_t(k)]);
    }
    gt_depth.at(i, 0) = sample.depth;
    valid.at(i, 0) = 1.f;
  }
  g.bind(pipe::kInvCount, Tensor<float>::scalar(1.f / float(cfg_.depth_rays)));
  g.bind(pipe::kWeightDepth, Tensor<float>::scalar(float(cfg_.loss.lambda_ds)));
  bind_field_params(g, *params_);
  g.run_forward();
  raw = double(g.value(pipe::kRawDepth)[0]);
  auto gr = g.backward(pipe::kLossTotal, Tensor<float>::scalar(1));
  auto list = params_->list();
  for (size_t p = 0; p < list.size(); ++p) {
    auto itg = gr.find(list[p].first);
    if (itg == gr.end()) continue;
    float* dst = grads[p].data();
    const float* src = itg->second.data();
    for (int64_t j = 0; j < grads[p].numel(); ++j) dst[j] += src[j];
  }
}

void Trainer::run_solar_graph(int64_t it, std::vector<Tensor<float>>& grads, double& raw) {
  Graph<float>& g = *solar_graph_;
  Tensor<float>& pe_x = g.leaf_data(pipe::kPeX);
  Tensor<float>& pe_w = g.leaf_data(pipe::kPeW);
  Tensor<float>& embed = g.leaf_data(pipe::kEmbedSel);
  Tensor<float>& t_target = g.leaf_data(pipe::kSolarT);
  Tensor<float>& w_target = g.leaf_data(pipe::kSolarW);
  embed.fill(0);

  Rng rng(cfg_.seed, stream::kSolar, uint64_t(it));
  const int f = data_.train_frames[size_t(rng.next_below(size_t(data_.train_frames.size())))];
  const Vec3 sun = data_.frames[size_t(f)].sun;
  const double span = (data_.alt_max - data_.alt_min) / sun.z;
  const int n = cfg_.samples;
  std::vector<int> embed_rows(size_t(cfg_.solar_rays) * size_t(n), 0);

  for (int i = 0; i < cfg_.solar_rays; ++i) {
    Ray ray;
    const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    const Vec3 target{x, y, data_.alt_min};
    ray.origin = target + sun * span;
    ray.direction = sun * -1.0;
    ray.t_near = 0;
    ray.t_far = span;
    SampleSet s = sample_along_ray(ray, n, true, rng);
    for (int k = 0; k < n; ++k) {
      const int64_t row = int64_t(i) * n + k;
      const Vec3 pn = world_normalize(s.position[size_t(k)], data_.bounds);
      const float p[3] = {float(pn.x), float(pn.y), float(pn.z)};
      positional_encode(p, 3, field_cfg_.pe_levels_position, pe_x.data() + row * pe_x.cols());
      const auto& senc = sun_encoded_[size_t(f)];
      std::copy(senc.begin(), senc.end(), pe_w.data() + row * pe_w.cols());
      embed.at(row, 0) = 1.f;
      // stash deltas here until the plain density pass replaces them below
      t_target.at(i, k) = float(s.delta[size_t(k)]);
      w_target.at(i, k) = float(s.t[size_t(k)]);
    }
  }

  // detached transmittance/weights from a plain density pass
  FieldBatch<float> fb = field_forward(*params_, pe_x, pe_w, embed_rows);
  const auto un = static_cast<size_t>(n);
  std::vector<float> sig(un), del(un);
  for (int i = 0; i < cfg_.solar_rays; ++i) {
    for (int k = 0; k < n; ++k) {
      sig[size_t(k)] = fb.sigma[size_t(i * n + k)];
      del[size_t(k)] = t_target.at(i, k);
    }
    auto cw = compositing_weights(sig, del);
    for (int k = 0; k < n; ++k) {
      t_target.at(i, k) = cw.transmittance[size_t(k)];
      w_target.at(i, k) = cw.weight[size_t(k)];
    }
  }

  g.bind(pipe::kWeightSolar, Tensor<float>::scalar(float(cfg_.loss.lambda_sc)));
  bind_field_params(g, *params_);
  g.run_forward();
  raw = double(g.value(pipe::kRawSolar)[0]);
  auto gr = g.backward(pipe::kLossTotal, Tensor<float>::scalar(1));
  auto list = params_->list();
  for (size_t p = 0; p < list.size(); ++p) {
    auto itg = gr.find(list[p].first);
    if (itg == gr.end()) continue;
    float* dst = grads[p].data();
    const float* src = itg->second.data();
    for (int64_t j = 0; j < grads[p].numel(); ++j) dst[j] += src[j];
  }
}

void Trainer::write_log_line(int64_t it, int epoch, double lr, const LossBreakdown& b,
                             double opacity) {
  fs::create_directories(cfg_.out_dir);
  static thread_local char line[512];
  std::snprintf(line, sizeof(line),
                "iter=%lld epoch=%d lr=%.9g total=%.9g color_l2=%.9g color_unc=%.9g sem=%.9g "
                "treg=%.9g solar=%.9g depth=%.9g opacity=%.9g\n",
                static_cast<long long>(it), epoch, lr, b.total, b.color_l2, b.color_uncertainty,
                b.semantic, b.transient_reg, b.solar, b.depth, opacity);
  std::ofstream log(metrics_log_path(), it == 0 ? std::ios::trunc : std::ios::app);
  log << line;
}

void Trainer::step(int64_t it) {
  const int epoch = sampler_.epoch_of(it);
  const bool plain = schedule_.plain_color(epoch);
  const bool treg_on = cfg_.enable_transient_reg && schedule_.transient_reg_active(epoch);
  const bool depth_on =
      cfg_.enable_depth && depth_graph_ && schedule_.depth_active(it, cfg_.iterations);
  const bool solar_on = cfg_.enable_solar && solar_graph_ != nullptr;
  const double lr = lr_at(epoch, cfg_.lr, cfg_.lr_decay);

  const std::vector<RayRef> rays = sampler_.batch(it);

  auto run_chunk = [&](int k) {
    ChunkContext& ctx = *chunks_[size_t(k)];
    Graph<float>& g = ctx.graph;
    fill_main_inputs(ctx, rays, k, it);
    g.bind(pipe::kWeightL2, Tensor<float>::scalar(plain ? 1.f : 0.f));
    g.bind(pipe::kWeightUnc, Tensor<float>::scalar(plain ? 0.f : 1.f));
    g.bind(pipe::kWeightSem, Tensor<float>::scalar(float(cfg_.loss.lambda_s)));
    g.bind(pipe::kWeightTreg, Tensor<float>::scalar(treg_on ? float(cfg_.loss.lambda_t) : 0.f));
    bind_field_params(g, *params_);
    g.run_forward();
    ctx.raw_l2 = double(g.value(pipe::kRawL2)[0]);
    ctx.raw_unc = double(g.value(pipe::kRawUnc)[0]);
    ctx.raw_sem = double(g.value(pipe::kRawSem)[0]);
    ctx.raw_treg = double(g.value(pipe::kRawTreg)[0]);
    const Tensor<float>& op = g.value(pipe::kOpacity);
    double acc = 0;
    for (int64_t i = 0; i < op.numel(); ++i) acc += double(op[size_t(i)]);
    ctx.opacity_sum = acc;
    ctx.grads = g.backward(pipe::kLossTotal, Tensor<float>::scalar(1));
  };

  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(chunks_.size());
  for (size_t k = 0; k < chunks_.size(); ++k)
    workers.emplace_back([&, k]() {
      try {
        run_chunk(int(k));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  // fixed accumulation order: chunks, then depth, then solar
  auto list = params_->list();
  std::vector<Tensor<float>> grads;
  for (auto& [name, t] : list) grads.push_back(Tensor<float>(t->rows(), t->cols()));
  RawLossTerms raw;
  double opacity_sum = 0;
  for (auto& ctx : chunks_) {
    raw.color_l2 += ctx->raw_l2;
    raw.color_uncertainty += ctx->raw_unc;
    raw.semantic += ctx->raw_sem;
    raw.transient_reg += ctx->raw_treg;
    opacity_sum += ctx->opacity_sum;
    for (size_t p = 0; p < list.size(); ++p) {
      auto itg = ctx->grads.find(list[p].first);
      if (itg == ctx->grads.end()) continue;
      float* dst = grads[p].data();
      const float* src = itg->second.data();
      for (int64_t j = 0; j < grads[p].numel(); ++j) dst[j] += src[j];
    }
  }
  if (depth_on) run_depth_graph(it, grads, raw.depth);
  if (solar_on) run_solar_graph(it, grads, raw.solar);

  LossBreakdown b = total_loss(raw, epoch, it, cfg_.iterations, cfg_.loss, schedule_);
  if (!treg_on) {
    b.total -= b.transient_reg;
    b.transient_reg = 0;
  }
  if (!depth_on) {
    b.total -= b.depth;
    b.depth = 0;
  }
  if (!solar_on) {
    b.total -= b.solar;
    b.solar = 0;
  }
  last_breakdown_ = b;

  if (!std::isfinite(b.total)) {
    char msg[256];
    std::snprintf(msg, sizeof(msg),
                  "non-finite loss at iteration %lld: l2=%g unc=%g sem=%g treg=%g solar=%g "
                  "depth=%g",
                  static_cast<long long>(it), raw.color_l2, raw.color_uncertainty, raw.semantic,
                  raw.transient_reg, raw.solar, raw.depth);
    throw std::runtime_error(msg);
  }

  adam_step(list, grads, *adam_, float(lr));

  if (it % cfg_.log_interval == 0 || it + 1 == cfg_.iterations)
    write_log_line(it, epoch, lr, b, opacity_sum / double(cfg_.batch));
  if ((it + 1) % cfg_.checkpoint_interval == 0) save_checkpoint_at(it + 1);
}

void Trainer::run_until(int64_t iteration) {
  if (!params_) initialize();
  while (iteration_ < iteration) {
    step(iteration_);
    ++iteration_;
  }
}

void Trainer::run() {
  run_until(cfg_.iterations);
  save_checkpoint_at(iteration_);
}

Checkpoint train(const Dataset& data, const RunConfig& config) {
  Trainer t(data, config);
  t.initialize();
  t.run();
  return t.snapshot();
}

}  // namespace ssnf
