#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ssnf/adam.hpp"
#include "ssnf/field.hpp"

namespace ssnf {

// Binary training snapshot. Layout (little-endian):
//   "SSCK" | u32 version | 32-byte config hash | sections
// where each section is a 4-byte tag, u64 payload length, payload. The
// required sections are PARM (named f32 tensors), ADAM (optimizer moments),
// RNGS (rng stream state) and CNTR (epoch/iteration counters); CONF carries
// the resolved config JSON so a checkpoint is renderable on its own.
// Full byte-level description in docs/formats.md.
struct Checkpoint {
  uint32_t version = 1;
  std::array<uint8_t, 32> config_hash{};
  std::string config_json;

  std::vector<std::pair<std::string, Tensor<float>>> params;
  std::vector<Tensor<float>> adam_m, adam_v;
  int64_t adam_step_count = 0;
  uint64_t rng_seed = 0;
  int64_t epoch = 1;
  int64_t iteration = 0;
  int64_t total_iterations = 0;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // copy stored tensors into a live parameter set (same names, same shapes)
  void restore_params(FieldParams<float>& dst) const;
  void restore_adam(AdamState<float>& dst) const;
  static Checkpoint capture(FieldParams<float>& params, const AdamState<float>& adam,
                            const std::array<uint8_t, 32>& config_hash,
                            const std::string& config_json, uint64_t rng_seed, int64_t epoch,
                            int64_t iteration, int64_t total_iterations);
};

}  // namespace ssnf
