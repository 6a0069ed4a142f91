#include "arbolatent/encoder.hpp"

#include <string>
#include <vector>

#include "arbolatent/error.hpp"

namespace arbolatent {

namespace {

const char* const kRequiredWindow[] = {"embed.table", "embed.aspect_marker", "enc.win.w", "enc.win.b"};
const char* const kRequiredRecurrent[] = {
    "embed.table",      "embed.aspect_marker", "enc.rnn.gate_fw", "enc.rnn.gate_fb",
    "enc.rnn.upd_fw",   "enc.rnn.upd_fb",      "enc.rnn.gate_bw", "enc.rnn.gate_bb",
    "enc.rnn.upd_bw",   "enc.rnn.upd_bb",      "enc.rnn.proj_w",  "enc.rnn.proj_b"};

void require_params(const ParamStore& store, EncoderKind kind) {
  const auto check = [&](const char* name) {
    if (!store.contains(name)) throw ValidationError(std::string("missing parameter: ") + name);
  };
  if (kind == EncoderKind::Window) {
    for (const char* name : kRequiredWindow) check(name);
  } else {
    for (const char* name : kRequiredRecurrent) check(name);
  }
}

Var one_minus(Tape& t, Var x) { return t.add_scalar(t.scale(x, -1.0), 1.0); }

// Aspect indicator added to the center embeddings of aspect-token rows.
Var marked_center(Tape& tape, Var center, const Instance& inst, std::size_t m, std::size_t de) {
  Tensor mask_col({m, 1});
  for (std::size_t p = inst.aspect_begin + 1; p < inst.aspect_end + 1; ++p) mask_col.at(p, 0) = 1.0;
  const Var marker = tape.reshape(tape.param("embed.aspect_marker"), {1, de});
  return tape.add(center, tape.matmul(tape.constant(std::move(mask_col)), marker));
}

Var encode_window(Tape& tape, const Instance& inst, const EmbeddingTable& table, const RunConfig& cfg) {
  const std::size_t n = inst.tokens.size();
  const std::size_t m = n + 1;
  const std::size_t de = table.dimension();
  const auto w = static_cast<std::int64_t>(cfg.encoder_window);
  const auto pad = static_cast<std::int64_t>(table.pad_row());

  const Var tab = tape.param("embed.table");
  std::vector<Var> columns;
  columns.reserve(2 * cfg.encoder_window + 1);
  for (std::int64_t off = -w; off <= w; ++off) {
    std::vector<std::int64_t> ids(m, pad);
    for (std::size_t p = 0; p < m; ++p) {
      if (p == 0) {
        if (off == 0) ids[p] = static_cast<std::int64_t>(table.node0_row());
        continue;  // the synthetic node is isolated: PAD neighbors
      }
      const std::int64_t q = static_cast<std::int64_t>(p) + off;
      if (q >= 1 && q <= static_cast<std::int64_t>(n)) {
        ids[p] = static_cast<std::int64_t>(table.row(inst.tokens[static_cast<std::size_t>(q - 1)], cfg.lowercase));
      }
    }
    Var col = tape.gather_rows(tab, std::move(ids));
    if (off == 0) col = marked_center(tape, col, inst, m, de);
    columns.push_back(col);
  }
  const Var x = tape.concat_cols(columns);
  const Var mixed = tape.matmul(x, tape.transpose(tape.param("enc.win.w")));
  return tape.tanh(tape.add_rowvec(mixed, tape.param("enc.win.b")));
}

Var encode_recurrent(Tape& tape, const Instance& inst, const EmbeddingTable& table, const RunConfig& cfg) {
  const std::size_t n = inst.tokens.size();
  const std::size_t m = n + 1;
  const std::size_t de = table.dimension();
  const std::size_t d = cfg.encoder_dim;

  const Var tab = tape.param("embed.table");
  std::vector<std::int64_t> ids(m);
  ids[0] = static_cast<std::int64_t>(table.node0_row());
  for (std::size_t i = 0; i < n; ++i) ids[i + 1] = static_cast<std::int64_t>(table.row(inst.tokens[i], cfg.lowercase));
  const Var center = marked_center(tape, tape.gather_rows(tab, std::move(ids)), inst, m, de);

  const auto step = [&](Var e, Var prev, const char* gate_w, const char* gate_b, const char* upd_w,
                        const char* upd_b) {
    const Var g = tape.sigmoid(tape.add(tape.matmul(tape.param(gate_w), e), tape.param(gate_b)));
    const Var u = tape.tanh(tape.add(tape.matmul(tape.param(upd_w), e), tape.param(upd_b)));
    return tape.add(tape.mul(g, prev), tape.mul(one_minus(tape, g), u));
  };

  std::vector<Var> fwd(m), bwd(m);
  Var state = tape.constant(Tensor({d}));
  for (std::size_t t = 0; t < m; ++t) {
    const Var e = tape.reshape(tape.slice_rows(center, t, t + 1), {de});
    state = step(e, state, "enc.rnn.gate_fw", "enc.rnn.gate_fb", "enc.rnn.upd_fw", "enc.rnn.upd_fb");
    fwd[t] = state;
  }
  state = tape.constant(Tensor({d}));
  for (std::size_t tt = m; tt-- > 0;) {
    const Var e = tape.reshape(tape.slice_rows(center, tt, tt + 1), {de});
    state = step(e, state, "enc.rnn.gate_bw", "enc.rnn.gate_bb", "enc.rnn.upd_bw", "enc.rnn.upd_bb");
    bwd[tt] = state;
  }
  const Var both = tape.concat_cols({tape.stack_rows(fwd), tape.stack_rows(bwd)});
  const Var mixed = tape.matmul(both, tape.transpose(tape.param("enc.rnn.proj_w")));
  return tape.tanh(tape.add_rowvec(mixed, tape.param("enc.rnn.proj_b")));
}

}  // namespace

void declare_encoder_params(ParamStore& store, const RunConfig& cfg, const EmbeddingTable& table) {
  const std::size_t de = table.dimension();
  const std::size_t d = cfg.encoder_dim;
  store.declare_external("embed.table", table.to_tensor());
  store.declare("embed.aspect_marker", {de}, {InitKind::Uniform, 0.1});
  if (cfg.encoder_kind == EncoderKind::Window) {
    store.declare("enc.win.w", {d, (2 * cfg.encoder_window + 1) * de}, {InitKind::Glorot, 0.0});
    store.declare("enc.win.b", {d}, {InitKind::Zeros, 0.0});
  } else {
    for (const char* dir : {"f", "b"}) {
      store.declare(std::string("enc.rnn.gate_") + dir + "w", {d, de}, {InitKind::Glorot, 0.0});
      store.declare(std::string("enc.rnn.gate_") + dir + "b", {d}, {InitKind::Zeros, 0.0});
      store.declare(std::string("enc.rnn.upd_") + dir + "w", {d, de}, {InitKind::Glorot, 0.0});
      store.declare(std::string("enc.rnn.upd_") + dir + "b", {d}, {InitKind::Zeros, 0.0});
    }
    store.declare("enc.rnn.proj_w", {d, 2 * d}, {InitKind::Glorot, 0.0});
    store.declare("enc.rnn.proj_b", {d}, {InitKind::Zeros, 0.0});
  }
}

EncodedSentence encode(Tape& tape, const Instance& inst, const EmbeddingTable& table,
                       ParamStore& params, const RunConfig& cfg) {
  validate_instance(inst);
  require_params(params, cfg.encoder_kind);

  EncodedSentence out;
  out.m = inst.tokens.size() + 1;
  out.aspect_row_begin = inst.aspect_begin + 1;
  out.aspect_row_end = inst.aspect_end + 1;
  out.H = cfg.encoder_kind == EncoderKind::Window ? encode_window(tape, inst, table, cfg)
                                                  : encode_recurrent(tape, inst, table, cfg);
  const Var rows = tape.slice_rows(out.H, out.aspect_row_begin, out.aspect_row_end);
  out.h_a = tape.scale(tape.col_sum(rows), 1.0 / static_cast<double>(inst.aspect_len()));
  return out;
}

}  // namespace arbolatent
