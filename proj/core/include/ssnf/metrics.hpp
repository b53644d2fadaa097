#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssnf/dataset.hpp"
#include "ssnf/field.hpp"
#include "ssnf/trainer.hpp"

namespace ssnf {

// ratio of correctly identified pixels over the non-ignored set
double semantic_accuracy(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gt,
                         const std::vector<bool>* ignore = nullptr);

struct AccuracyReport {
  std::string split;
  std::vector<std::string> frame_names;
  std::vector<double> per_frame;
  double mean = 0;  // unweighted over frames
  std::vector<int64_t> confusion;  // C x C counts, row = gt, col = pred

  std::string to_key_values() const;
};

// Renders every frame of the chosen split and scores the semantic modality
// against the dataset labels. With transient_free, ground-truth Vehicles
// pixels are remapped to Ground (the class underneath every decal).
AccuracyReport evaluate_semantic_accuracy(const FieldParams<float>& params, const Dataset& data,
                                          const std::string& split, bool transient_free,
                                          int samples, int threads);

// 10 log10(1/MSE); +inf for identical images
double psnr(const std::vector<float>& pred, const std::vector<float>& gt);

// Mean aggregated uncertainty over all training-frame pixels labeled with
// the transient class, each rendered with its own frame embedding.
double transient_uncertainty(const FieldParams<float>& params, const Dataset& data, int samples,
                             int threads);

struct CorruptionConfig {
  double target_loss = 0.2;  // fraction of pixels reassigned
  int blur_radius = 1;       // box blur on the coarse noise grid
  int rescale = 4;           // coarse grid cell size in pixels
  uint64_t seed = 0;
  int cycle_offset = 1;      // region of class c is reassigned to (c + offset) mod C
  int min_class_pixels = 24; // classes smaller than this are left intact
};

// Spatially coherent label corruption: per class, a blurred and upsampled
// gaussian noise field selects the target fraction of that class's pixels,
// which move to the next class in the cycle. The overall corrupted-pixel
// count is pinned to round(target_loss * total).
std::vector<uint8_t> corrupt_labels(const std::vector<uint8_t>& labels, int width, int height,
                                    int n_classes, const CorruptionConfig& cfg);

// mean 4-connected changed-region size, for the coherence contract
double mean_corruption_region_size(const std::vector<uint8_t>& before,
                                   const std::vector<uint8_t>& after, int width, int height);

// Copies a dataset directory, replacing training labels with corrupted
// ones (per-frame noise seeds). Test frames keep clean labels.
void corrupt_dataset(const std::string& src_dir, const std::string& dst_dir,
                     const CorruptionConfig& cfg);

struct FusionReport {
  std::vector<std::string> frame_names;
  std::vector<double> input_accuracy;  // training labels vs clean gt
  std::vector<double> fused_accuracy;  // rendered semantics vs clean gt
  double input_mean = 0, fused_mean = 0, delta = 0;

  std::string to_key_values() const;
};

// The multi-view label fusion experiment: render every training view from a
// model trained on (possibly corrupted) labels and compare both the training
// labels and the renders against clean ground truth.
FusionReport fuse_labels(const FieldParams<float>& params, const Dataset& trained_on,
                         const Dataset& clean, int samples, int threads);

}  // namespace ssnf
