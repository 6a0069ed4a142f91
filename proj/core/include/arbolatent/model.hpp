#pragma once

#include <optional>
#include <vector>

#include "arbolatent/classifier.hpp"
#include "arbolatent/config.hpp"
#include "arbolatent/data.hpp"
#include "arbolatent/encoder.hpp"
#include "arbolatent/tape.hpp"
#include "arbolatent/tree_encoder.hpp"
#include "arbolatent/tree_inducer.hpp"

namespace arbolatent {

struct ForwardOptions {
  // Row-level dropout multipliers for H (0 or 1/(1-p)), length m. Null = none.
  const std::vector<double>* row_dropout = nullptr;
  // Order-k pruning between the inducer and the tree encoder. Detaches the
  // tree encoder from the marginal gradients, so evaluation only.
  std::optional<int> prune_k;
  bool want_loss = true;
};

struct ForwardResult {
  Var loss{}, loss_a{}, loss_s{};
  double loss_value = 0.0, loss_a_value = 0.0, loss_s_value = 0.0;
  Tensor probs;  // 3-class distribution
  int predicted = 0;
  TreeMarginals marginals;  // values as used by the tree encoder
  double aspect_root_mass = 0.0;
  std::size_t aspect_row_begin = 0, aspect_row_end = 0;
};

void declare_model_params(ParamStore& store, const RunConfig& cfg, const EmbeddingTable& table);

// Full differentiable pass: encode, induce marginals, tree-encode, classify.
ForwardResult model_forward(Tape& tape, const Instance& inst, const EmbeddingTable& table,
                            ParamStore& params, const RunConfig& cfg, const ForwardOptions& opts = {});

}  // namespace arbolatent
