#pragma once

#include <optional>

#include "arbolatent/config.hpp"
#include "arbolatent/tape.hpp"
#include "arbolatent/tree_inducer.hpp"
#include "arbolatent/tree_tools.hpp"

namespace arbolatent {

// Soft tree encoding: parent context sum_k P_ki h_k + root_p_i h_a, child
// context sum_k P_ik h_k (ChildStates; LiteralSelf multiplies h_i by the
// child-mass instead), then s_i = tanh(W_s [s_p; s_c; h_i]).
Var structured_attention(Tape& tape, Var H, Var P, Var root_p, Var h_a, ParamStore& params,
                         ChildContext child_ctx = ChildContext::ChildStates);

// GCN variant: adjacency P + P^T + I, row-normalized; each layer computes
// relu((A^T H) W + b).
Var gcn_encode(Tape& tape, Var H, Var P, ParamStore& params, std::size_t layers);

// Structured representation row 0 (the classifier input).
Var structured_root(Tape& tape, Var S);

// Copy of `marginals` with P[i][j] zeroed unless i or j is within k-1 hops of
// the nearest aspect token on the decoded tree (so k=1 keeps only edges
// touching the aspect). root_p is untouched; no renormalization. nullopt k is
// a no-op; k < 1 is an error.
TreeMarginals prune_mask(const TreeMarginals& marginals, std::size_t aspect_row_begin,
                         std::size_t aspect_row_end, std::optional<int> k, const Arborescence& tree);

void declare_tree_encoder_params(ParamStore& store, const RunConfig& cfg);

}  // namespace arbolatent
