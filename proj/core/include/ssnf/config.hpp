#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ssnf/field.hpp"
#include "ssnf/losses.hpp"

namespace ssnf {

// Full experiment configuration. Serializes to a flat-ish JSON document;
// unknown keys are rejected so a typo cannot silently fall back to a
// default. The sha256 of the canonical dump is recorded in checkpoints.
struct RunConfig {
  std::string data_dir;
  std::string out_dir;

  int64_t iterations = 300000;
  int batch = 1024;
  int samples = 64;  // per ray
  double lr = 5e-4;
  double lr_decay = 0.9;  // per epoch
  uint64_t seed = 0;
  int64_t checkpoint_interval = 1000;
  int64_t log_interval = 10;
  int threads = 2;
  int grad_chunks = 2;  // micro-batches per iteration; fixed, so thread count
                        // never changes results
  int solar_rays = 16;
  int depth_rays = 32;
  bool enable_solar = true;
  bool enable_depth = true;
  bool enable_transient_reg = true;

  FieldConfig field;
  LossWeights loss;
  int plain_color_epochs = 2;
  int treg_start_epoch = 4;
  double depth_fraction = 0.25;

  // small model / few iterations; finishes on a CPU in minutes
  static RunConfig desk() {
    RunConfig c;
    c.iterations = 5000;
    c.batch = 128;
    c.field = FieldConfig::desk();
    c.checkpoint_interval = 2500;
    return c;
  }

  void validate() const;
  std::string to_json_string() const;                  // canonical (sorted keys)
  static RunConfig from_json_string(const std::string& text, bool allow_partial = true);
  static RunConfig load_file(const std::string& path, const RunConfig& base);
  std::array<uint8_t, 32> hash() const;
};

// base_lr * decay^(epoch-1)
inline double lr_at(int epoch, double base_lr, double decay) {
  if (epoch < 1) throw std::invalid_argument("lr_at: epoch starts at 1");
  return base_lr * std::pow(decay, epoch - 1);
}

}  // namespace ssnf
