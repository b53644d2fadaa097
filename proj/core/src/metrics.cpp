#include "ssnf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ssnf/rng.hpp"

namespace ssnf {

namespace fs = std::filesystem;

double semantic_accuracy(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gt,
                         const std::vector<bool>* ignore) {
  if (pred.size() != gt.size()) throw std::invalid_argument("semantic_accuracy: size mismatch");
  int64_t correct = 0, total = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (ignore && (*ignore)[i]) continue;
    ++total;
    if (pred[i] == gt[i]) ++correct;
  }
  if (total == 0) throw std::invalid_argument("semantic_accuracy: empty evaluation set");
  return double(correct) / double(total);
}

std::string AccuracyReport::to_key_values() const {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "split=%s\n", split.c_str());
  out << buf;
  for (size_t i = 0; i < per_frame.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "accuracy_%s=%.6f\n", frame_names[i].c_str(), per_frame[i]);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "accuracy_mean=%.6f\n", mean);
  out << buf;
  return out.str();
}

AccuracyReport evaluate_semantic_accuracy(const FieldParams<float>& params, const Dataset& data,
                                          const std::string& split, bool transient_free,
                                          int samples, int threads) {
  const std::vector<int>& idx = split == "train" ? data.train_frames : data.test_frames;
  if (idx.empty()) throw std::invalid_argument("no frames in split " + split);
  AccuracyReport rep;
  rep.split = split;
  const int n_cls = params.config.n_classes;
  rep.confusion.assign(size_t(n_cls) * size_t(n_cls), 0);
  for (int f : idx) {
    const DatasetFrame& frame = data.frames[size_t(f)];
    ViewRender r = render_frame(params, data, f, samples, threads);
    std::vector<uint8_t> gt = frame.labels;
    if (transient_free)
      for (auto& v : gt)
        if (int(v) == data.transient_class) v = uint8_t(kGround);
    rep.frame_names.push_back(frame.name);
    rep.per_frame.push_back(semantic_accuracy(r.sem_class, gt));
    for (size_t i = 0; i < gt.size(); ++i)
      rep.confusion[size_t(gt[i]) * size_t(n_cls) + size_t(r.sem_class[i])] += 1;
  }
  rep.mean = std::accumulate(rep.per_frame.begin(), rep.per_frame.end(), 0.0) /
             double(rep.per_frame.size());
  return rep;
}

double psnr(const std::vector<float>& pred, const std::vector<float>& gt) {
  if (pred.size() != gt.size() || pred.empty()) throw std::invalid_argument("psnr: size mismatch");
  double mse = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = double(pred[i]) - double(gt[i]);
    mse += d * d;
  }
  mse /= double(pred.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double transient_uncertainty(const FieldParams<float>& params, const Dataset& data, int samples,
                             int threads) {
  double acc = 0;
  int64_t count = 0;
  for (int f : data.train_frames) {
    const DatasetFrame& frame = data.frames[size_t(f)];
    bool any = false;
    for (uint8_t l : frame.labels)
      if (int(l) == data.transient_class) {
        any = true;
        break;
      }
    if (!any) continue;
    ViewRender r = render_frame(params, data, f, samples, threads);
    for (size_t i = 0; i < frame.labels.size(); ++i)
      if (int(frame.labels[i]) == data.transient_class) {
        acc += double(r.beta_agg[i]);
        ++count;
      }
  }
  if (count == 0)
    throw std::invalid_argument("transient_uncertainty: no transient pixels in training frames");
  return acc / double(count);
}

// -------------------------------------------------------------- corruption

namespace {

// blurred coarse gaussian noise, bilinearly upsampled to the frame size
std::vector<double> coherent_noise(int width, int height, const CorruptionConfig& cfg,
                                   uint64_t stream_tag) {
  const int cw = std::max(2, (width + cfg.rescale - 1) / cfg.rescale);
  const int ch = std::max(2, (height + cfg.rescale - 1) / cfg.rescale);
  Rng rng(cfg.seed, stream::kCorrupt, stream_tag);
  std::vector<double> coarse(size_t(cw) * size_t(ch));
  for (auto& v : coarse) v = rng.normal();

  if (cfg.blur_radius > 0) {
    std::vector<double> blurred(coarse.size());
    const int r = cfg.blur_radius;
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x) {
        double acc = 0;
        int n = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= ch || xx < 0 || xx >= cw) continue;
            acc += coarse[size_t(yy) * size_t(cw) + size_t(xx)];
            ++n;
          }
        blurred[size_t(y) * size_t(cw) + size_t(x)] = acc / n;
      }
    coarse = std::move(blurred);
  }

  std::vector<double> out(size_t(width) * size_t(height));
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width * (cw - 1);
      const double v = (y + 0.5) / height * (ch - 1);
      const int x0 = std::clamp(int(u), 0, cw - 2), y0 = std::clamp(int(v), 0, ch - 2);
      const double fx = u - x0, fy = v - y0;
      auto g = [&](int yy, int xx) { return coarse[size_t(yy) * size_t(cw) + size_t(xx)]; };
      out[size_t(y) * size_t(width) + size_t(x)] = g(y0, x0) * (1 - fx) * (1 - fy) +
                                                   g(y0, x0 + 1) * fx * (1 - fy) +
                                                   g(y0 + 1, x0) * (1 - fx) * fy +
                                                   g(y0 + 1, x0 + 1) * fx * fy;
    }
  return out;
}

}  // namespace

std::vector<uint8_t> corrupt_labels(const std::vector<uint8_t>& labels, int width, int height,
                                    int n_classes, const CorruptionConfig& cfg) {
  if (int(labels.size()) != width * height)
    throw std::invalid_argument("corrupt_labels: size mismatch");
  if (cfg.target_loss < 0 || cfg.target_loss >= 1)
    throw std::invalid_argument("corrupt_labels: target loss must be in [0,1)");
  std::vector<uint8_t> out = labels;
  if (cfg.target_loss == 0) return out;

  std::vector<int64_t> class_count(size_t(n_classes), 0);
  for (uint8_t l : labels) class_count[l] += 1;

  // per-class quotas; the largest eligible class absorbs rounding so the
  // total changed count is exactly round(target * total)
  const int64_t total = int64_t(labels.size());
  const int64_t want_total = llround(cfg.target_loss * double(total));
  std::vector<int64_t> quota(size_t(n_classes), 0);
  int largest = -1;
  int64_t assigned = 0;
  for (int c = 0; c < n_classes; ++c) {
    if (class_count[size_t(c)] < cfg.min_class_pixels) continue;
    quota[size_t(c)] = llround(cfg.target_loss * double(class_count[size_t(c)]));
    assigned += quota[size_t(c)];
    if (largest < 0 || class_count[size_t(c)] > class_count[size_t(largest)]) largest = c;
  }
  if (largest < 0) throw std::invalid_argument("corrupt_labels: no eligible class to corrupt");
  quota[size_t(largest)] = std::clamp<int64_t>(quota[size_t(largest)] + (want_total - assigned),
                                               0, class_count[size_t(largest)]);

  for (int c = 0; c < n_classes; ++c) {
    const int64_t k = quota[size_t(c)];
    if (k <= 0) continue;
    const std::vector<double> noise = coherent_noise(width, height, cfg, uint64_t(c));
    // threshold at the k-th largest noise value among this class's pixels
    std::vector<std::pair<double, int>> vals;
    vals.reserve(size_t(class_count[size_t(c)]));
    for (int i = 0; i < int(labels.size()); ++i)
      if (labels[size_t(i)] == c) vals.push_back({noise[size_t(i)], i});
    std::nth_element(vals.begin(), vals.begin() + (k - 1), vals.end(),
                     [](const auto& a, const auto& b) {
                       return a.first > b.first || (a.first == b.first && a.second < b.second);
                     });
    const uint8_t target = uint8_t((c + cfg.cycle_offset) % n_classes);
    for (int64_t i = 0; i < k; ++i) out[size_t(vals[size_t(i)].second)] = target;
  }
  return out;
}

double mean_corruption_region_size(const std::vector<uint8_t>& before,
                                   const std::vector<uint8_t>& after, int width, int height) {
  std::vector<char> changed(before.size());
  for (size_t i = 0; i < before.size(); ++i) changed[i] = before[i] != after[i];
  std::vector<char> seen(before.size(), 0);
  std::vector<int64_t> sizes;
  std::vector<int> stack;
  for (int start = 0; start < int(before.size()); ++start) {
    if (!changed[size_t(start)] || seen[size_t(start)]) continue;
    int64_t size = 0;
    stack.push_back(start);
    seen[size_t(start)] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      ++size;
      const int r = i / width, c = i % width;
      const int neighbors[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& nb : neighbors) {
        if (nb[0] < 0 || nb[0] >= height || nb[1] < 0 || nb[1] >= width) continue;
        const int j = nb[0] * width + nb[1];
        if (changed[size_t(j)] && !seen[size_t(j)]) {
          seen[size_t(j)] = 1;
          stack.push_back(j);
        }
      }
    }
    sizes.push_back(size);
  }
  if (sizes.empty()) return 0;
  return double(std::accumulate(sizes.begin(), sizes.end(), int64_t(0))) / double(sizes.size());
}

void corrupt_dataset(const std::string& src_dir, const std::string& dst_dir,
                     const CorruptionConfig& cfg) {
  Dataset src = Dataset::load(src_dir);
  fs::create_directories(dst_dir);
  for (const char* sub : {"rgb", "labels", "rpc", "depth"})
    fs::create_directories(fs::path(dst_dir) / sub);
  fs::copy_file(fs::path(src_dir) / "meta.json", fs::path(dst_dir) / "meta.json",
                fs::copy_options::overwrite_existing);
  for (const auto& f : src.frames) {
    for (const char* sub : {"rgb", "rpc", "depth"}) {
      const std::string ext = std::strcmp(sub, "rgb") == 0 ? ".png"
                              : std::strcmp(sub, "rpc") == 0 ? ".txt"
                                                             : ".bin";
      const auto from = fs::path(src_dir) / sub / (f.name + ext);
      if (fs::exists(from))
        fs::copy_file(from, fs::path(dst_dir) / sub / (f.name + ext),
                      fs::copy_options::overwrite_existing);
    }
    std::vector<uint8_t> labels = f.labels;
    if (f.is_train) {
      CorruptionConfig frame_cfg = cfg;
      // independent noise per frame so multi-view fusion can vote errors out
      frame_cfg.seed = mix_seed(cfg.seed, 0x1AB5u, uint64_t(f.embed_index + 1));
      labels = corrupt_labels(labels, src.width, src.height, int(src.class_names.size()),
                              frame_cfg);
    }
    write_png_palette((fs::path(dst_dir) / "labels" / (f.name + ".png")).string(), src.width,
                      src.height, labels, class_palette());
  }
}

std::string FusionReport::to_key_values() const {
  std::ostringstream out;
  char buf[128];
  for (size_t i = 0; i < frame_names.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "input_%s=%.6f fused_%s=%.6f\n", frame_names[i].c_str(),
                  input_accuracy[i], frame_names[i].c_str(), fused_accuracy[i]);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "input_mean=%.6f\nfused_mean=%.6f\ndelta=%.6f\n", input_mean,
                fused_mean, delta);
  out << buf;
  return out.str();
}

FusionReport fuse_labels(const FieldParams<float>& params, const Dataset& trained_on,
                         const Dataset& clean, int samples, int threads) {
  if (trained_on.train_frames.size() != clean.train_frames.size())
    throw std::invalid_argument("fuse_labels: dataset split mismatch");
  FusionReport rep;
  for (size_t i = 0; i < trained_on.train_frames.size(); ++i) {
    const DatasetFrame& noisy = trained_on.frames[size_t(trained_on.train_frames[i])];
    const DatasetFrame& truth = clean.frames[size_t(clean.train_frames[i])];
    if (noisy.name != truth.name)
      throw std::invalid_argument("fuse_labels: frame order mismatch at " + noisy.name);
    ViewRender r = render_frame(params, trained_on, trained_on.train_frames[i], samples, threads);
    rep.frame_names.push_back(noisy.name);
    rep.input_accuracy.push_back(semantic_accuracy(noisy.labels, truth.labels));
    rep.fused_accuracy.push_back(semantic_accuracy(r.sem_class, truth.labels));
  }
  rep.input_mean = std::accumulate(rep.input_accuracy.begin(), rep.input_accuracy.end(), 0.0) /
                   double(rep.input_accuracy.size());
  rep.fused_mean = std::accumulate(rep.fused_accuracy.begin(), rep.fused_accuracy.end(), 0.0) /
                   double(rep.fused_accuracy.size());
  rep.delta = rep.fused_mean - rep.input_mean;
  return rep;
}

}  // namespace ssnf
