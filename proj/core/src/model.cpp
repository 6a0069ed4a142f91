#include "arbolatent/model.hpp"

#include "arbolatent/error.hpp"
#include "arbolatent/tree_tools.hpp"

namespace arbolatent {

void declare_model_params(ParamStore& store, const RunConfig& cfg, const EmbeddingTable& table) {
  const std::size_t d = cfg.encoder_dim;
  declare_encoder_params(store, cfg, table);
  store.declare("tree.w_p", {d, d}, {InitKind::Glorot, 0.0});
  store.declare("tree.w_c", {d, d}, {InitKind::Glorot, 0.0});
  store.declare("tree.w_b", {d, d}, {InitKind::Glorot, 0.0});
  store.declare("tree.w_r", {1, d}, {InitKind::Glorot, 0.0});
  declare_tree_encoder_params(store, cfg);
  declare_classifier_params(store, cfg);
}

ForwardResult model_forward(Tape& tape, const Instance& inst, const EmbeddingTable& table,
                            ParamStore& params, const RunConfig& cfg, const ForwardOptions& opts) {
  tape.set_context("instance " + inst.id);
  const EncodedSentence enc = encode(tape, inst, table, params, cfg);

  Var H = enc.H;
  if (opts.row_dropout) {
    if (opts.row_dropout->size() != enc.m) throw ShapeError("dropout mask length mismatch");
    H = tape.scale_rows(H, tape.constant(Tensor::vec(*opts.row_dropout)));
  }

  const Var E = edge_scores(tape, H, params);
  const Var r = root_scores(tape, H, params);
  const MarginalVars marg = mtt_marginals(tape, E, r);

  ForwardResult out;
  out.aspect_row_begin = enc.aspect_row_begin;
  out.aspect_row_end = enc.aspect_row_end;
  out.marginals = TreeMarginals{tape.value(marg.P), tape.value(marg.root_p), marg.log_z};
  for (std::size_t i = enc.aspect_row_begin; i < enc.aspect_row_end; ++i) {
    out.aspect_root_mass += out.marginals.root_p[i];
  }

  // Tree-encoder inputs; pruning decodes the discrete tree and re-enters the
  // masked marginals as constants.
  Var P = marg.P;
  Var root_p = marg.root_p;
  if (opts.prune_k) {
    const Arborescence tree = cle_extract(out.marginals);
    out.marginals =
        prune_mask(out.marginals, enc.aspect_row_begin, enc.aspect_row_end, opts.prune_k, tree);
    P = tape.constant(out.marginals.P);
    root_p = tape.constant(out.marginals.root_p);
  }

  Var S{};
  if (cfg.tree_encoder_kind == TreeEncoderKind::StructuredAttention) {
    S = structured_attention(tape, H, P, root_p, enc.h_a, params, cfg.child_ctx);
  } else {
    S = gcn_encode(tape, H, P, params, cfg.tree_encoder_layers);
  }
  const Var s0 = structured_root(tape, S);
  const Var probs = classify(tape, s0, params);
  out.probs = tape.value(probs);
  out.predicted = argmax_class(out.probs);

  if (opts.want_loss) {
    std::vector<bool> aspect_mask(enc.m, false);
    for (std::size_t i = enc.aspect_row_begin; i < enc.aspect_row_end; ++i) aspect_mask[i] = true;
    out.loss_a = root_refinement_loss(tape, marg.root_p, aspect_mask);
    out.loss_s = sentiment_loss(tape, probs, inst.polarity);
    out.loss = combined_loss(tape, out.loss_a, out.loss_s, cfg.alpha);
    out.loss_a_value = tape.scalar(out.loss_a);
    out.loss_s_value = tape.scalar(out.loss_s);
    out.loss_value = tape.scalar(out.loss);
  }
  return out;
}

}  // namespace arbolatent
