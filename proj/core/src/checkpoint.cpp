#include "ssnf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ssnf {

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char(uint8_t(v >> (8 * i))));
}
void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char(uint8_t(v >> (8 * i))));
}
void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const uint8_t* p;
  const uint8_t* end;

  void need(size_t n) const {
    if (size_t(end - p) < n) throw std::runtime_error("checkpoint: truncated data");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
    p += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
    p += 8;
    return v;
  }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    return s;
  }
};

std::string encode_tensor(const std::string& name, const Tensor<float>& t) {
  std::string out;
  put_u32(out, uint32_t(name.size()));
  out += name;
  put_u32(out, uint32_t(t.rows()));
  put_u32(out, uint32_t(t.cols()));
  out.append(reinterpret_cast<const char*>(t.data()), size_t(t.numel()) * 4);
  return out;
}

std::pair<std::string, Tensor<float>> decode_tensor(Reader& r) {
  const uint32_t name_len = r.u32();
  const std::string name = r.bytes(name_len);
  const uint32_t rows = r.u32(), cols = r.u32();
  Tensor<float> t(rows, cols);
  const std::string raw = r.bytes(size_t(rows) * cols * 4);
  std::memcpy(t.data(), raw.data(), raw.size());
  return {name, std::move(t)};
}

void put_section(std::string& out, const char tag[5], const std::string& payload) {
  out.append(tag, 4);
  put_u64(out, payload.size());
  out += payload;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  std::string out;
  out.append("SSCK", 4);
  put_u32(out, version);
  out.append(reinterpret_cast<const char*>(config_hash.data()), 32);

  std::string parm;
  put_u32(parm, uint32_t(params.size()));
  for (const auto& [name, t] : params) parm += encode_tensor(name, t);
  put_section(out, "PARM", parm);

  std::string adam;
  put_u64(adam, uint64_t(adam_step_count));
  put_u32(adam, uint32_t(adam_m.size()));
  for (size_t i = 0; i < adam_m.size(); ++i) {
    adam += encode_tensor(params[i].first, adam_m[i]);
    adam += encode_tensor(params[i].first, adam_v[i]);
  }
  put_section(out, "ADAM", adam);

  std::string rngs;
  put_u64(rngs, rng_seed);
  put_section(out, "RNGS", rngs);

  std::string cntr;
  put_u64(cntr, uint64_t(epoch));
  put_u64(cntr, uint64_t(iteration));
  put_u64(cntr, uint64_t(total_iterations));
  put_section(out, "CNTR", cntr);

  put_section(out, "CONF", config_json);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string buf = ss.str();
  Reader r{reinterpret_cast<const uint8_t*>(buf.data()),
           reinterpret_cast<const uint8_t*>(buf.data()) + buf.size()};

  if (r.bytes(4) != "SSCK") throw std::runtime_error("bad checkpoint magic: " + path);
  Checkpoint ck;
  ck.version = r.u32();
  if (ck.version != 1) throw std::runtime_error("unsupported checkpoint version");
  const std::string hash = r.bytes(32);
  std::memcpy(ck.config_hash.data(), hash.data(), 32);

  while (r.p < r.end) {
    const std::string tag = r.bytes(4);
    const uint64_t len = r.u64();
    r.need(len);
    Reader section{r.p, r.p + len};
    r.p += len;
    if (tag == "PARM") {
      const uint32_t n = section.u32();
      for (uint32_t i = 0; i < n; ++i) ck.params.push_back(decode_tensor(section));
    } else if (tag == "ADAM") {
      ck.adam_step_count = int64_t(section.u64());
      const uint32_t n = section.u32();
      for (uint32_t i = 0; i < n; ++i) {
        ck.adam_m.push_back(decode_tensor(section).second);
        ck.adam_v.push_back(decode_tensor(section).second);
      }
    } else if (tag == "RNGS") {
      ck.rng_seed = section.u64();
    } else if (tag == "CNTR") {
      ck.epoch = int64_t(section.u64());
      ck.iteration = int64_t(section.u64());
      ck.total_iterations = int64_t(section.u64());
    } else if (tag == "CONF") {
      ck.config_json = section.bytes(len);
    }
    // unknown sections are skipped
  }
  if (ck.params.empty()) throw std::runtime_error("checkpoint has no parameters: " + path);
  return ck;
}

void Checkpoint::restore_params(FieldParams<float>& dst) const {
  auto list = dst.list();
  if (list.size() != params.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (size_t i = 0; i < list.size(); ++i) {
    if (list[i].first != params[i].first)
      throw std::runtime_error("checkpoint: parameter name mismatch at " + params[i].first);
    if (!list[i].second->same_shape(params[i].second))
      throw std::runtime_error("checkpoint: parameter shape mismatch at " + params[i].first);
    *list[i].second = params[i].second;
  }
}

void Checkpoint::restore_adam(AdamState<float>& dst) const {
  if (dst.first_moment.size() != adam_m.size())
    throw std::runtime_error("checkpoint: adam state size mismatch");
  dst.first_moment = adam_m;
  dst.second_moment = adam_v;
  dst.step_count = adam_step_count;
}

Checkpoint Checkpoint::capture(FieldParams<float>& params, const AdamState<float>& adam,
                               const std::array<uint8_t, 32>& config_hash,
                               const std::string& config_json, uint64_t rng_seed, int64_t epoch,
                               int64_t iteration, int64_t total_iterations) {
  Checkpoint ck;
  ck.config_hash = config_hash;
  ck.config_json = config_json;
  for (auto& [name, t] : params.list()) ck.params.push_back({name, *t});
  ck.adam_m = adam.first_moment;
  ck.adam_v = adam.second_moment;
  ck.adam_step_count = adam.step_count;
  ck.rng_seed = rng_seed;
  ck.epoch = epoch;
  ck.iteration = iteration;
  ck.total_iterations = total_iterations;
  return ck;
}

}  // namespace ssnf
