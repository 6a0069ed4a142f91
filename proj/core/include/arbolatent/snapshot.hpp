#pragma once

#include <string>

#include "arbolatent/config.hpp"
#include "arbolatent/data.hpp"
#include "arbolatent/param_store.hpp"

namespace arbolatent {

struct ModelSnapshot {
  ParamStore params;
  EmbeddingTable table;  // vocabulary only; values live in params
  RunConfig config;
};

// Portable flat file: text header (magic, JSON with config echo, vocabulary
// and parameter shapes) followed by float64 little-endian values.
void save_model(const std::string& path, const ParamStore& params, const EmbeddingTable& table,
                const RunConfig& cfg);

// Validates the stored parameter names/shapes against what the stored config
// declares; mismatches raise ValidationError.
ModelSnapshot load_model(const std::string& path);

}  // namespace arbolatent
