#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssnf/colormap.hpp"
#include "ssnf/geometry.hpp"
#include "ssnf/image.hpp"
#include "ssnf/rpc.hpp"

namespace ssnf {

struct DepthSample {
  int row = 0, col = 0;
  float depth = 0;  // t along the pixel ray
};

struct DatasetFrame {
  std::string name;
  bool is_train = true;
  int embed_index = -1;  // -1 for test frames
  Vec3 sun, view;
  RpcModel rpc;
  ImageRgb8 rgb;
  std::vector<uint8_t> labels;
  std::vector<DepthSample> depth;
};

// A dataset directory as written by export_dataset: meta.json plus rgb/,
// labels/, rpc/ and depth/ per frame.
struct Dataset {
  std::string dir;
  int width = 0, height = 0;
  double alt_min = 0, alt_max = 0;
  Box3 bounds;
  int transient_class = int(kVehicles);
  std::vector<std::string> class_names;
  std::vector<DatasetFrame> frames;
  std::vector<int> train_frames, test_frames;

  int n_train() const { return int(train_frames.size()); }
  static Dataset load(const std::string& dir);
};

std::vector<DepthSample> read_depth_file(const std::string& path);
void write_depth_file(const std::string& path, const std::vector<DepthSample>& samples);

}  // namespace ssnf
