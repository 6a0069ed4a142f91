#include "arbolatent/tree_inducer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arbolatent/error.hpp"
#include "arbolatent/linalg.hpp"

namespace arbolatent {

namespace detail {
bool mtt_flip_second_term = false;
}  // namespace detail

namespace {
void require_param(const ParamStore& params, const char* name) {
  if (!params.contains(name)) throw ValidationError(std::string("missing parameter: ") + name);
}
}  // namespace

Var edge_scores(Tape& tape, Var H, ParamStore& params) {
  for (const char* name : {"tree.w_p", "tree.w_c", "tree.w_b"}) require_param(params, name);
  const Var head = tape.tanh(tape.matmul(H, tape.transpose(tape.param("tree.w_p"))));
  const Var dep = tape.tanh(tape.matmul(H, tape.transpose(tape.param("tree.w_c"))));
  return tape.matmul(tape.matmul(head, tape.param("tree.w_b")), tape.transpose(dep));
}

Var root_scores(Tape& tape, Var H, ParamStore& params) {
  require_param(params, "tree.w_r");
  const std::size_t m = tape.value(H).rows();
  return tape.reshape(tape.matmul(H, tape.transpose(tape.param("tree.w_r"))), {m});
}

namespace {

Mask diagonal_mask(std::size_t m) {
  auto mask = std::make_shared<std::vector<std::uint8_t>>(m * m, std::uint8_t{0});
  for (std::size_t i = 0; i < m; ++i) (*mask)[i * m + i] = 1;
  return mask;
}

Mask row_mask(std::size_t m, std::size_t row) {
  auto mask = std::make_shared<std::vector<std::uint8_t>>(m * m, std::uint8_t{0});
  for (std::size_t j = 0; j < m; ++j) (*mask)[row * m + j] = 1;
  return mask;
}

Mask col_mask(std::size_t m, std::size_t col) {
  auto mask = std::make_shared<std::vector<std::uint8_t>>(m * m, std::uint8_t{0});
  for (std::size_t i = 0; i < m; ++i) (*mask)[i * m + col] = 1;
  return mask;
}

}  // namespace

MarginalVars mtt_marginals(Tape& tape, Var E, Var r) {
  const Tensor& Ev = tape.value(E);
  const Tensor& rv = tape.value(r);
  if (Ev.rank() != 2 || Ev.rows() != Ev.cols()) throw ShapeError("edge scores must be square");
  const std::size_t m = Ev.rows();
  if (m == 0) throw ShapeError("mtt_marginals on zero nodes");
  if (rv.size() != m) throw ShapeError("root score length does not match edge scores");

  // Numerical guard, constant w.r.t. the gradient. Each node j consumes
  // exactly one of {an in-edge score E_ij, the root score r_j}, so subtracting
  // c_j from column j of E and from r_j rescales every tree weight by the same
  // exp(-sum c_j). Every tree also carries exactly one root factor, so the
  // root weights can be rescaled by their own max. Both leave P and root_p
  // exactly unchanged while keeping the Laplacian well-conditioned even when
  // the tree distribution concentrates.
  Tensor col_shift({m});
  for (std::size_t j = 0; j < m; ++j) {
    double cj = rv[j];
    for (std::size_t i = 0; i < m; ++i) {
      if (i != j) cj = std::max(cj, Ev.at(i, j));
    }
    col_shift[j] = cj;
  }
  double root_shift = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) root_shift = std::max(root_shift, rv[j] - col_shift[j]);
  Tensor r_shift({m});
  for (std::size_t j = 0; j < m; ++j) r_shift[j] = col_shift[j] + root_shift;

  const Var E_shifted = tape.sub(E, tape.broadcast_row(tape.constant(col_shift), m));
  const Var A = tape.masked_fill(tape.exp(E_shifted), diagonal_mask(m), 0.0);
  const Var L = tape.sub(tape.diag_embed(tape.col_sum(A)), A);
  const Var root_w = tape.exp(tape.sub(r, tape.constant(r_shift)));
  const Var L_bar = tape.set_row(L, 0, root_w);
  const Var B = tape.inverse(L_bar);

  // P_ij = (1-d_{j0}) A_ij B_jj - (1-d_{i0}) A_ij B_ji
  const Var term1 = tape.masked_fill(tape.mul(A, tape.broadcast_row(tape.diag_part(B), m)), col_mask(m, 0), 0.0);
  const Var term2 = tape.masked_fill(tape.mul(A, tape.transpose(B)), row_mask(m, 0), 0.0);
  MarginalVars out;
  out.P = detail::mtt_flip_second_term ? tape.add(term1, term2) : tape.sub(term1, term2);
  out.root_p = tape.mul(root_w, tape.column(B, 0));
  // undo the per-column and root rescaling in the partition diagnostic
  double shift_total = root_shift;
  for (std::size_t j = 0; j < m; ++j) shift_total += col_shift[j];
  out.log_z = logdet(tape.value(L_bar), tape.context()) + shift_total;
  return out;
}

TreeMarginals mtt_marginals(const ScoreSet& scores) {
  Tape tape;
  const Var E = tape.constant(scores.E);
  const Var r = tape.constant(scores.r);
  const MarginalVars vars = mtt_marginals(tape, E, r);
  return TreeMarginals{tape.value(vars.P), tape.value(vars.root_p), vars.log_z};
}

Var root_refinement_loss(Tape& tape, Var root_p, const std::vector<bool>& aspect_mask) {
  const Tensor& pr = tape.value(root_p);
  if (pr.size() != aspect_mask.size()) {
    throw ShapeError("aspect mask length does not match root marginals");
  }
  Tensor t({aspect_mask.size()});
  Tensor not_t({aspect_mask.size()});
  for (std::size_t i = 0; i < aspect_mask.size(); ++i) {
    t[i] = aspect_mask[i] ? 1.0 : 0.0;
    not_t[i] = aspect_mask[i] ? 0.0 : 1.0;
  }
  const Var clamped = tape.clamp(root_p, 1e-12, 1.0 - 1e-12);
  const Var log_p = tape.log(clamped);
  const Var log_not_p = tape.log(tape.add_scalar(tape.scale(clamped, -1.0), 1.0));
  const Var ce = tape.add(tape.mul(tape.constant(std::move(t)), log_p),
                          tape.mul(tape.constant(std::move(not_t)), log_not_p));
  return tape.scale(tape.sum(ce), -1.0);
}

}  // namespace arbolatent
