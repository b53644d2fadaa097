#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ssnf/checkpoint.hpp"
#include "ssnf/config.hpp"
#include "ssnf/dataset.hpp"
#include "ssnf/pipeline.hpp"
#include "ssnf/rays.hpp"

namespace ssnf {

struct RayRef {
  int frame = 0;
  int pixel = 0;
};

// Epoch-permutation batch sampler: each epoch shuffles all training rays
// with a per-epoch stream, batches are consecutive slices. The permutation
// derives from (seed, epoch) alone, so resuming mid-epoch is exact.
class BatchSampler {
 public:
  BatchSampler(const Dataset& data, int batch, uint64_t seed);

  int64_t iterations_per_epoch() const { return iters_per_epoch_; }
  int64_t total_rays() const { return int64_t(all_rays_.size()); }
  int epoch_of(int64_t iteration) const { return int(iteration / iters_per_epoch_) + 1; }
  std::vector<RayRef> batch(int64_t iteration) const;

 private:
  const std::vector<RayRef>& permutation(int64_t epoch_index) const;

  std::vector<RayRef> all_rays_;
  int batch_ = 0;
  uint64_t seed_ = 0;
  int64_t iters_per_epoch_ = 0;
  mutable int64_t cached_epoch_ = -1;
  mutable std::vector<RayRef> cached_perm_;
};

// Full-frame evaluation render (bin-center sampling, no jitter).
struct ViewRender {
  int width = 0, height = 0, n_classes = 0;
  std::vector<float> rgb;        // 3 per pixel
  std::vector<uint8_t> sem_class;
  std::vector<float> sem_probs;  // n_classes per pixel
  std::vector<float> sun_agg, beta_agg, depth, opacity;
};

ViewRender render_view(const FieldParams<float>& params, const Dataset& data,
                       const RpcModel& camera, const Vec3& sun_dir, int embed_index, int samples,
                       int threads);

// Convenience for dataset frames; test frames fall back to embedding 0.
ViewRender render_frame(const FieldParams<float>& params, const Dataset& data, int frame_index,
                        int samples, int threads);

class Trainer {
 public:
  Trainer(const Dataset& data, const RunConfig& config);
  ~Trainer();

  void initialize();                    // fresh seed-derived parameters
  void resume_from(const Checkpoint& ck);
  void run();                           // to config.iterations
  void run_until(int64_t iteration);    // partial run (tests)

  FieldParams<float>& params() { return *params_; }
  const AdamState<float>& adam_state() const { return *adam_; }
  int64_t iteration() const { return iteration_; }
  int64_t iterations_per_epoch() const { return sampler_.iterations_per_epoch(); }
  Checkpoint snapshot() const;
  Checkpoint snapshot_at(int64_t iteration) const;
  LossBreakdown last_breakdown() const { return last_breakdown_; }

  std::string checkpoint_path() const;
  std::string metrics_log_path() const;

 private:
  struct ChunkContext;
  void step(int64_t it);
  void fill_main_inputs(ChunkContext& ctx, const std::vector<RayRef>& rays, int chunk,
                        int64_t it);
  void run_depth_graph(int64_t it, std::vector<Tensor<float>>& grads, double& raw);
  void run_solar_graph(int64_t it, std::vector<Tensor<float>>& grads, double& raw);
  void write_log_line(int64_t it, int epoch, double lr, const LossBreakdown& b, double opacity);
  void save_checkpoint_at(int64_t iteration) const;

  const Dataset& data_;
  RunConfig cfg_;
  FieldConfig field_cfg_;  // config.field with n_embeddings bound to the dataset
  BatchSampler sampler_;
  LossSchedule schedule_;

  std::unique_ptr<FieldParams<float>> params_;
  std::unique_ptr<AdamState<float>> adam_;
  std::vector<std::unique_ptr<ChunkContext>> chunks_;
  std::unique_ptr<Graph<float>> depth_graph_;
  std::unique_ptr<Graph<float>> solar_graph_;

  std::vector<std::vector<Ray>> rays_;            // per frame, per pixel
  std::vector<std::vector<float>> sun_encoded_;   // per frame
  std::vector<std::pair<int, DepthSample>> depth_pool_;  // (frame, sample)

  int64_t iteration_ = 0;
  LossBreakdown last_breakdown_;
};

// Runs a full training job and leaves checkpoint + metrics log in
// config.out_dir. Returns the final state.
Checkpoint train(const Dataset& data, const RunConfig& config);

}  // namespace ssnf
