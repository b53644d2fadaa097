#include "ssnf/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "ssnf/sha256.hpp"

namespace ssnf {

using nlohmann::json;

namespace {

const std::set<std::string> kTopKeys = {
    "data_dir",      "out_dir",      "iterations",    "batch",
    "samples",       "lr",           "lr_decay",      "seed",
    "checkpoint_interval", "log_interval", "threads", "grad_chunks",
    "solar_rays",    "depth_rays",   "enable_solar",  "enable_depth",
    "enable_transient_reg", "field", "loss",          "plain_color_epochs",
    "treg_start_epoch", "depth_fraction"};

const std::set<std::string> kFieldKeys = {
    "backbone_layers", "backbone_width", "semantic_hidden", "n_classes",
    "embed_dim",       "pe_levels_position", "pe_levels_sun", "encode_sun",
    "semantic_activation", "sun_hidden", "ambient_hidden", "beta_hidden",
    "sigma_scale"};

const std::set<std::string> kLossKeys = {"lambda_s",  "lambda_t", "lambda_sc",
                                         "lambda_ds", "beta_floor", "eta"};

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::invalid_argument("unknown config key '" + it.key() + "' in " + where);
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  if (iterations < 0 || batch < 1 || samples < 2 || lr <= 0 || lr_decay <= 0 ||
      checkpoint_interval < 1 || log_interval < 1 || threads < 1 || grad_chunks < 1 ||
      solar_rays < 1 || depth_rays < 1)
    throw std::invalid_argument("RunConfig: non-positive setting");
  if (batch % grad_chunks != 0)
    throw std::invalid_argument("RunConfig: batch must be divisible by grad_chunks");
  field.validate();
  loss.validate();
  if (treg_start_epoch <= plain_color_epochs)
    throw std::invalid_argument("RunConfig: transient reg must start after the plain color phase");
  if (depth_fraction < 0 || depth_fraction > 1)
    throw std::invalid_argument("RunConfig: depth_fraction outside [0,1]");
}

std::string RunConfig::to_json_string() const {
  json j;
  j["data_dir"] = data_dir;
  j["out_dir"] = out_dir;
  j["iterations"] = iterations;
  j["batch"] = batch;
  j["samples"] = samples;
  j["lr"] = lr;
  j["lr_decay"] = lr_decay;
  j["seed"] = seed;
  j["checkpoint_interval"] = checkpoint_interval;
  j["log_interval"] = log_interval;
  j["threads"] = threads;
  j["grad_chunks"] = grad_chunks;
  j["solar_rays"] = solar_rays;
  j["depth_rays"] = depth_rays;
  j["enable_solar"] = enable_solar;
  j["enable_depth"] = enable_depth;
  j["enable_transient_reg"] = enable_transient_reg;
  j["plain_color_epochs"] = plain_color_epochs;
  j["treg_start_epoch"] = treg_start_epoch;
  j["depth_fraction"] = depth_fraction;
  json f;
  f["backbone_layers"] = field.backbone_layers;
  f["backbone_width"] = field.backbone_width;
  f["semantic_hidden"] = field.semantic_hidden;
  f["n_classes"] = field.n_classes;
  f["embed_dim"] = field.embed_dim;
  f["pe_levels_position"] = field.pe_levels_position;
  f["pe_levels_sun"] = field.pe_levels_sun;
  f["encode_sun"] = field.encode_sun;
  f["semantic_activation"] =
      field.semantic_activation == SemanticActivation::kSigmoid ? "sigmoid" : "none";
  f["sun_hidden"] = field.sun_hidden;
  f["ambient_hidden"] = field.ambient_hidden;
  f["beta_hidden"] = field.beta_hidden;
  f["sigma_scale"] = field.sigma_scale;
  j["field"] = f;
  json l;
  l["lambda_s"] = loss.lambda_s;
  l["lambda_t"] = loss.lambda_t;
  l["lambda_sc"] = loss.lambda_sc;
  l["lambda_ds"] = loss.lambda_ds;
  l["beta_floor"] = loss.beta_floor;
  l["eta"] = loss.eta;
  j["loss"] = l;
  return j.dump(2);
}

static void apply_json(RunConfig& c, const json& j) {
  reject_unknown(j, kTopKeys, "config");
  maybe(j, "data_dir", c.data_dir);
  maybe(j, "out_dir", c.out_dir);
  maybe(j, "iterations", c.iterations);
  maybe(j, "batch", c.batch);
  maybe(j, "samples", c.samples);
  maybe(j, "lr", c.lr);
  maybe(j, "lr_decay", c.lr_decay);
  maybe(j, "seed", c.seed);
  maybe(j, "checkpoint_interval", c.checkpoint_interval);
  maybe(j, "log_interval", c.log_interval);
  maybe(j, "threads", c.threads);
  maybe(j, "grad_chunks", c.grad_chunks);
  maybe(j, "solar_rays", c.solar_rays);
  maybe(j, "depth_rays", c.depth_rays);
  maybe(j, "enable_solar", c.enable_solar);
  maybe(j, "enable_depth", c.enable_depth);
  maybe(j, "enable_transient_reg", c.enable_transient_reg);
  maybe(j, "plain_color_epochs", c.plain_color_epochs);
  maybe(j, "treg_start_epoch", c.treg_start_epoch);
  maybe(j, "depth_fraction", c.depth_fraction);
  if (j.contains("field")) {
    const json& f = j.at("field");
    reject_unknown(f, kFieldKeys, "config.field");
    maybe(f, "backbone_layers", c.field.backbone_layers);
    maybe(f, "backbone_width", c.field.backbone_width);
    maybe(f, "semantic_hidden", c.field.semantic_hidden);
    maybe(f, "n_classes", c.field.n_classes);
    maybe(f, "embed_dim", c.field.embed_dim);
    maybe(f, "pe_levels_position", c.field.pe_levels_position);
    maybe(f, "pe_levels_sun", c.field.pe_levels_sun);
    maybe(f, "encode_sun", c.field.encode_sun);
    if (f.contains("semantic_activation")) {
      const std::string a = f.at("semantic_activation").get<std::string>();
      if (a == "sigmoid")
        c.field.semantic_activation = SemanticActivation::kSigmoid;
      else if (a == "none")
        c.field.semantic_activation = SemanticActivation::kNone;
      else
        throw std::invalid_argument("semantic_activation must be 'sigmoid' or 'none'");
    }
    maybe(f, "sun_hidden", c.field.sun_hidden);
    maybe(f, "ambient_hidden", c.field.ambient_hidden);
    maybe(f, "beta_hidden", c.field.beta_hidden);
    maybe(f, "sigma_scale", c.field.sigma_scale);
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    reject_unknown(l, kLossKeys, "config.loss");
    maybe(l, "lambda_s", c.loss.lambda_s);
    maybe(l, "lambda_t", c.loss.lambda_t);
    maybe(l, "lambda_sc", c.loss.lambda_sc);
    maybe(l, "lambda_ds", c.loss.lambda_ds);
    maybe(l, "beta_floor", c.loss.beta_floor);
    maybe(l, "eta", c.loss.eta);
  }
}

RunConfig RunConfig::from_json_string(const std::string& text, bool allow_partial) {
  json j = json::parse(text);
  RunConfig c;
  if (!allow_partial) c = RunConfig();
  apply_json(c, j);
  return c;
}

RunConfig RunConfig::load_file(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j = json::parse(in);
  RunConfig c = base;
  apply_json(c, j);
  return c;
}

std::array<uint8_t, 32> RunConfig::hash() const { return sha256(to_json_string()); }

}  // namespace ssnf
