#include "ssnf/dataset.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace ssnf {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<DepthSample> read_depth_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open depth file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SSNF", 4) != 0)
    throw std::runtime_error("bad depth file magic: " + path);
  uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  std::vector<DepthSample> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t row = 0, col = 0;
    float depth = 0;
    in.read(reinterpret_cast<char*>(&row), 4);
    in.read(reinterpret_cast<char*>(&col), 4);
    in.read(reinterpret_cast<char*>(&depth), 4);
    if (!in) throw std::runtime_error("truncated depth file: " + path);
    out.push_back({int(row), int(col), depth});
  }
  return out;
}

void write_depth_file(const std::string& path, const std::vector<DepthSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write depth file: " + path);
  out.write("SSNF", 4);
  const uint32_t count = uint32_t(samples.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& s : samples) {
    const uint32_t row = uint32_t(s.row), col = uint32_t(s.col);
    out.write(reinterpret_cast<const char*>(&row), 4);
    out.write(reinterpret_cast<const char*>(&col), 4);
    out.write(reinterpret_cast<const char*>(&s.depth), 4);
  }
}

Dataset Dataset::load(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "meta.json");
  if (!mf) throw std::runtime_error("cannot open dataset meta: " + dir + "/meta.json");
  json meta = json::parse(mf);

  Dataset d;
  d.dir = dir;
  d.width = d.height = meta.at("grid").get<int>();
  d.alt_min = meta.at("alt_min").get<double>();
  d.alt_max = meta.at("alt_max").get<double>();
  const auto& b = meta.at("bounds");
  d.bounds.min = {b.at("min")[0], b.at("min")[1], b.at("min")[2]};
  d.bounds.max = {b.at("max")[0], b.at("max")[1], b.at("max")[2]};
  d.class_names = meta.at("classes").get<std::vector<std::string>>();
  if (meta.contains("transient_class")) d.transient_class = meta["transient_class"].get<int>();

  for (const auto& jf : meta.at("frames")) {
    DatasetFrame f;
    f.name = jf.at("name").get<std::string>();
    f.is_train = jf.at("split").get<std::string>() == "train";
    f.embed_index = jf.at("embed").get<int>();
    f.sun = {jf.at("sun")[0], jf.at("sun")[1], jf.at("sun")[2]};
    f.view = {jf.at("view")[0], jf.at("view")[1], jf.at("view")[2]};
    f.rpc = read_rpc_file((fs::path(dir) / "rpc" / (f.name + ".txt")).string());
    f.rgb = read_png_rgb8((fs::path(dir) / "rgb" / (f.name + ".png")).string());
    if (f.rgb.width != d.width || f.rgb.height != d.height)
      throw std::runtime_error("dataset frame size mismatch: " + f.name);
    IndexedImage lbl = read_png_palette((fs::path(dir) / "labels" / (f.name + ".png")).string());
    if (lbl.width != d.width || lbl.height != d.height)
      throw std::runtime_error("dataset label size mismatch: " + f.name);
    f.labels = std::move(lbl.indices);
    for (uint8_t v : f.labels)
      if (v >= d.class_names.size()) throw std::runtime_error("label out of range in " + f.name);
    const auto depth_path = fs::path(dir) / "depth" / (f.name + ".bin");
    if (fs::exists(depth_path)) f.depth = read_depth_file(depth_path.string());
    if (f.is_train)
      d.train_frames.push_back(int(d.frames.size()));
    else
      d.test_frames.push_back(int(d.frames.size()));
    d.frames.push_back(std::move(f));
  }
  if (d.frames.empty()) throw std::runtime_error("dataset has no frames: " + dir);
  for (int i : d.train_frames) {
    const int e = d.frames[size_t(i)].embed_index;
    if (e < 0 || e >= d.n_train())
      throw std::runtime_error("bad embedding index in train frame " + d.frames[size_t(i)].name);
  }
  return d;
}

}  // namespace ssnf
