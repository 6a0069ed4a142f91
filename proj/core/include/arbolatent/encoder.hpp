#pragma once

#include "arbolatent/config.hpp"
#include "arbolatent/data.hpp"
#include "arbolatent/tape.hpp"

namespace arbolatent {

// Hidden states for one sentence. Row 0 is the synthetic sentence node; token
// i (0-based) sits at row i+1. h_a is the mean of the aspect-token rows.
struct EncodedSentence {
  Var H;    // (n+1) x d
  Var h_a;  // d
  std::size_t m = 0;                 // n + 1
  std::size_t aspect_row_begin = 0;  // H-row coordinates
  std::size_t aspect_row_end = 0;
};

void declare_encoder_params(ParamStore& store, const RunConfig& cfg, const EmbeddingTable& table);

// Differentiable encoding of an instance with the configured context mixer.
// Aspect tokens additionally receive a learned indicator embedding before
// mixing. Throws ValidationError on empty input or missing parameters.
EncodedSentence encode(Tape& tape, const Instance& inst, const EmbeddingTable& table,
                       ParamStore& params, const RunConfig& cfg);

}  // namespace arbolatent
