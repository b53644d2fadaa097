#pragma once

#include "ssnf/checkpoint.hpp"
#include "ssnf/config.hpp"

namespace ssnf {

// Rebuilds live parameters from a checkpoint using its embedded config.
// The embedding-table row count comes from the stored tensor itself.
inline FieldParams<float> load_field_params(const Checkpoint& ck, RunConfig* config_out = nullptr) {
  RunConfig cfg = RunConfig::from_json_string(ck.config_json);
  FieldConfig fc = cfg.field;
  for (const auto& [name, t] : ck.params)
    if (name == "embed") fc.n_embeddings = int(t.rows());
  FieldParams<float> params = FieldParams<float>::init(fc, 0);
  ck.restore_params(params);
  if (config_out) *config_out = cfg;
  return params;
}

}  // namespace ssnf
