#pragma once

#include <vector>

#include "arbolatent/tape.hpp"
#include "arbolatent/tensor.hpp"

namespace arbolatent {

// Unnormalized scores for one sentence: E[i][j] scores head i -> dependent j,
// r[i] scores node i as root. The diagonal of E is ignored downstream.
struct ScoreSet {
  Tensor E;  // m x m
  Tensor r;  // m
};

// Distribution over single-root arborescences: P[i][j] is the marginal of
// edge i->j, root_p[i] the marginal of i being the root. log_z is the
// log-partition value, tracked for diagnostics only.
struct TreeMarginals {
  Tensor P;       // m x m, zero diagonal
  Tensor root_p;  // m
  double log_z = 0.0;
};

struct ScoreVars {
  Var E;
  Var r;
};

struct MarginalVars {
  Var P;
  Var root_p;
  double log_z = 0.0;
};

// E[i][j] = tanh(W_p h_i)^T W_b tanh(W_c h_j) for all ordered pairs.
Var edge_scores(Tape& tape, Var H, ParamStore& params);

// r[i] = W_r h_i.
Var root_scores(Tape& tape, Var H, ParamStore& params);

// Matrix-Tree marginal inference over single-root arborescences, differentiable
// end-to-end. Scores are shifted by their global max before exponentiation
// (the marginals are shift-invariant). Throws SingularMatrixError when the
// total tree weight vanishes.
MarginalVars mtt_marginals(Tape& tape, Var E, Var r);

// Convenience wrapper over concrete scores.
TreeMarginals mtt_marginals(const ScoreSet& scores);

// Binary cross-entropy pulling root mass onto aspect tokens: the mask is true
// exactly on aspect-token rows. Marginals are clamped to [1e-12, 1-1e-12]
// before the logs.
Var root_refinement_loss(Tape& tape, Var root_p, const std::vector<bool>& aspect_mask);

namespace detail {
// Test hook: negates the second term of the edge-marginal formula so the
// oracle-equivalence check can demonstrate that it catches sign bugs.
extern bool mtt_flip_second_term;
}  // namespace detail

}  // namespace arbolatent
