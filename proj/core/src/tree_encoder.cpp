#include "arbolatent/tree_encoder.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <string>

#include "arbolatent/error.hpp"

namespace arbolatent {

Var structured_attention(Tape& tape, Var H, Var P, Var root_p, Var h_a, ParamStore& params,
                         ChildContext child_ctx) {
  if (!params.contains("tree_enc.w_s")) throw ValidationError("missing parameter: tree_enc.w_s");
  const Tensor& Hv = tape.value(H);
  const std::size_t m = Hv.rows();
  const std::size_t d = Hv.cols();

  const Var parent_sum = tape.matmul(tape.transpose(P), H);
  const Var root_ctx = tape.matmul(tape.reshape(root_p, {m, 1}), tape.reshape(h_a, {1, d}));
  const Var s_parent = tape.add(parent_sum, root_ctx);

  Var s_child{};
  if (child_ctx == ChildContext::ChildStates) {
    s_child = tape.matmul(P, H);
  } else {
    // literal reading: sum_k P_ik * h_i
    s_child = tape.scale_rows(H, tape.row_sum(P));
  }

  const Var x = tape.concat_cols({s_parent, s_child, H});
  return tape.tanh(tape.matmul(x, tape.transpose(tape.param("tree_enc.w_s"))));
}

Var gcn_encode(Tape& tape, Var H, Var P, ParamStore& params, std::size_t layers) {
  if (layers < 1) throw ValidationError("gcn_encode needs at least one layer");
  const Tensor& Hv = tape.value(H);
  const std::size_t m = Hv.rows();

  const Var raw = tape.add(tape.add(P, tape.transpose(P)), tape.constant(Tensor::identity(m)));
  const Var adj = tape.scale_rows(raw, tape.reciprocal(tape.row_sum(raw)));

  Var h = H;
  for (std::size_t layer = 0; layer < layers; ++layer) {
    const std::string w_name = "tree_enc.gcn.w" + std::to_string(layer);
    const std::string b_name = "tree_enc.gcn.b" + std::to_string(layer);
    if (!params.contains(w_name)) throw ValidationError("missing parameter: " + w_name);
    const Var agg = tape.matmul(tape.transpose(adj), h);
    h = tape.relu(tape.add_rowvec(tape.matmul(agg, tape.param(w_name)), tape.param(b_name)));
  }
  return h;
}

Var structured_root(Tape& tape, Var S) {
  const std::size_t d = tape.value(S).cols();
  return tape.reshape(tape.slice_rows(S, 0, 1), {d});
}

TreeMarginals prune_mask(const TreeMarginals& marginals, std::size_t aspect_row_begin,
                         std::size_t aspect_row_end, std::optional<int> k, const Arborescence& tree) {
  if (!k) return marginals;
  if (*k < 1) throw ValidationError("prune order k must be >= 1");
  const std::size_t m = marginals.root_p.size();
  if (tree.size() != m) throw ShapeError("prune_mask: tree does not match marginals");
  if (aspect_row_begin >= aspect_row_end || aspect_row_end > m) {
    throw ValidationError("prune_mask: aspect rows out of range");
  }

  // BFS distances from the aspect span over the undirected tree
  std::vector<int> dist(m, -1);
  std::deque<std::size_t> queue;
  for (std::size_t q = aspect_row_begin; q < aspect_row_end; ++q) {
    dist[q] = 0;
    queue.push_back(q);
  }
  std::vector<std::vector<std::size_t>> adj(m);
  for (std::size_t v = 0; v < m; ++v) {
    if (tree.heads[v] == kRootHead) continue;
    const auto h = static_cast<std::size_t>(tree.heads[v]);
    adj[v].push_back(h);
    adj[h].push_back(v);
  }
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    for (std::size_t nb : adj[cur]) {
      if (dist[nb] < 0) {
        dist[nb] = dist[cur] + 1;
        queue.push_back(nb);
      }
    }
  }

  // keep P[i][j] iff one endpoint lies within k-1 hops of the aspect
  TreeMarginals out = marginals;
  const int reach = *k - 1;
  const auto inside = [&](std::size_t v) { return dist[v] >= 0 && dist[v] <= reach; };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (!inside(i) && !inside(j)) out.P.at(i, j) = 0.0;
    }
  }
  return out;
}

void declare_tree_encoder_params(ParamStore& store, const RunConfig& cfg) {
  const std::size_t d = cfg.encoder_dim;
  if (cfg.tree_encoder_kind == TreeEncoderKind::StructuredAttention) {
    store.declare("tree_enc.w_s", {d, 3 * d}, {InitKind::Glorot, 0.0});
  } else {
    for (std::size_t layer = 0; layer < cfg.tree_encoder_layers; ++layer) {
      store.declare("tree_enc.gcn.w" + std::to_string(layer), {d, d}, {InitKind::Glorot, 0.0});
      store.declare("tree_enc.gcn.b" + std::to_string(layer), {d}, {InitKind::Zeros, 0.0});
    }
  }
}

}  // namespace arbolatent
