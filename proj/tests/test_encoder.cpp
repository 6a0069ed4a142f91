#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "arbolatent/autodiff.hpp"
#include "arbolatent/encoder.hpp"
#include "arbolatent/error.hpp"

using namespace arbolatent;

namespace {

Instance make_instance(std::vector<std::string> tokens, std::size_t a0, std::size_t a1) {
  Instance inst;
  inst.id = "t";
  inst.tokens = std::move(tokens);
  inst.aspect_begin = a0;
  inst.aspect_end = a1;
  inst.polarity = Polarity::Positive;
  return inst;
}

struct Setup {
  EmbeddingTable table;
  RunConfig cfg;
  ParamStore store;
};

Setup make_setup(const std::vector<std::string>& vocab, EncoderKind kind, std::uint64_t seed) {
  RunConfig cfg;
  cfg.encoder_kind = kind;
  cfg.encoder_dim = 8;
  cfg.embedding_dim = 8;
  Setup s{EmbeddingTable::random(vocab, cfg.embedding_dim, seed), cfg, {}};
  declare_encoder_params(s.store, s.cfg, s.table);
  s.store.initialize(seed + 1);
  return s;
}

}  // namespace

TEST_CASE("single-token sentence: H is 2 x d and h_a equals row 1") {
  Setup s = make_setup({"food"}, EncoderKind::Window, 3);
  Tape tape(&s.store);
  const EncodedSentence enc = encode(tape, make_instance({"food"}, 0, 1), s.table, s.store, s.cfg);
  const Tensor& H = tape.value(enc.H);
  REQUIRE(H.rows() == 2);
  REQUIRE(H.cols() == 8);
  CHECK(H.all_finite());
  for (std::size_t j = 0; j < 8; ++j) {
    CHECK(std::abs(tape.value(enc.h_a)[j] - H.at(1, j)) <= 1e-12);
  }
}

TEST_CASE("encoding is deterministic") {
  for (EncoderKind kind : {EncoderKind::Window, EncoderKind::Recurrent}) {
    Setup s = make_setup({"the", "food", "rocks"}, kind, 5);
    const Instance inst = make_instance({"the", "food", "rocks"}, 1, 2);
    Tape t1(&s.store), t2(&s.store);
    const EncodedSentence e1 = encode(t1, inst, s.table, s.store, s.cfg);
    const EncodedSentence e2 = encode(t2, inst, s.table, s.store, s.cfg);
    CHECK(t1.value(e1.H) == t2.value(e2.H));
  }
}

TEST_CASE("two-token aspect: h_a is the exact row mean") {
  Setup s = make_setup({"the", "wine", "list", "rocks"}, EncoderKind::Window, 7);
  Tape tape(&s.store);
  const EncodedSentence enc =
      encode(tape, make_instance({"the", "wine", "list", "rocks"}, 1, 3), s.table, s.store, s.cfg);
  const Tensor& H = tape.value(enc.H);
  for (std::size_t j = 0; j < 8; ++j) {
    const double mean = 0.5 * (H.at(2, j) + H.at(3, j));
    CHECK(std::abs(tape.value(enc.h_a)[j] - mean) <= 1e-12);
  }
}

TEST_CASE("window mixer is local: a distant swap leaves far rows unchanged") {
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f"};
  Setup s = make_setup(vocab, EncoderKind::Window, 11);
  const Instance base = make_instance({"a", "b", "c", "d", "e", "f"}, 0, 1);
  const Instance swapped = make_instance({"a", "b", "e", "d", "c", "f"}, 0, 1);  // swap tokens 2 and 4
  Tape t1(&s.store), t2(&s.store);
  const Tensor& h1 = t1.value(encode(t1, base, s.table, s.store, s.cfg).H);
  const Tensor& h2 = t2.value(encode(t2, swapped, s.table, s.store, s.cfg).H);
  // token rows 2 and 4 sit at H rows 3 and 5; window 1 touches rows 2..6
  for (std::size_t row : {0u, 1u}) {
    for (std::size_t j = 0; j < 8; ++j) CHECK(h1.at(row, j) == h2.at(row, j));
  }
  bool changed = false;
  for (std::size_t j = 0; j < 8; ++j) changed |= h1.at(3, j) != h2.at(3, j);
  CHECK(changed);
}

TEST_CASE("gradients reach only the embeddings of words present") {
  Setup s = make_setup({"x", "y", "z"}, EncoderKind::Window, 13);
  const Instance inst = make_instance({"x", "y"}, 0, 1);
  Tape tape(&s.store);
  const EncodedSentence enc = encode(tape, inst, s.table, s.store, s.cfg);
  s.store.zero_grads();
  tape.backward(tape.sum(enc.H));
  const Tensor& g = s.store.grad("embed.table");
  const auto row_nonzero = [&](std::size_t r) {
    for (std::size_t j = 0; j < 8; ++j) {
      if (g.at(r, j) != 0.0) return true;
    }
    return false;
  };
  CHECK(row_nonzero(s.table.row("x")));
  CHECK(row_nonzero(s.table.row("y")));
  CHECK(row_nonzero(s.table.pad_row()));    // boundary windows
  CHECK(row_nonzero(s.table.node0_row()));  // synthetic node
  CHECK(!row_nonzero(s.table.row("z")));
  CHECK(!row_nonzero(s.table.unk_row()));
}

TEST_CASE("aspect indicator changes the marked rows") {
  Setup s = make_setup({"a", "b"}, EncoderKind::Window, 17);
  Tape t1(&s.store), t2(&s.store);
  const Tensor& h1 = t1.value(encode(t1, make_instance({"a", "b"}, 0, 1), s.table, s.store, s.cfg).H);
  const Tensor& h2 = t2.value(encode(t2, make_instance({"a", "b"}, 1, 2), s.table, s.store, s.cfg).H);
  bool differs = false;
  for (std::size_t j = 0; j < 8; ++j) differs |= h1.at(1, j) != h2.at(1, j);
  CHECK(differs);
}

TEST_CASE("empty token list is rejected") {
  Setup s = make_setup({"a"}, EncoderKind::Window, 19);
  Tape tape(&s.store);
  Instance inst = make_instance({"a"}, 0, 1);
  inst.tokens.clear();
  inst.aspect_end = 0;
  CHECK_THROWS_AS((void)encode(tape, inst, s.table, s.store, s.cfg), ValidationError);
}

TEST_CASE("missing parameters are reported by name") {
  Setup s = make_setup({"a"}, EncoderKind::Window, 23);
  ParamStore empty;
  Tape tape(&empty);
  try {
    (void)encode(tape, make_instance({"a"}, 0, 1), s.table, empty, s.cfg);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("missing parameter") != std::string::npos);
  }
}

TEST_CASE("recurrent mixer: shapes and finite-difference gradients") {
  Setup s = make_setup({"p", "q", "r"}, EncoderKind::Recurrent, 29);
  const Instance inst = make_instance({"p", "q", "r"}, 1, 2);
  {
    Tape tape(&s.store);
    const EncodedSentence enc = encode(tape, inst, s.table, s.store, s.cfg);
    CHECK(tape.value(enc.H).rows() == 4);
    CHECK(tape.value(enc.H).all_finite());
  }
  const double err = grad_check(
      [&](Tape& t, ParamStore& st) {
        const EncodedSentence enc = encode(t, inst, s.table, st, s.cfg);
        return t.sum(t.mul(enc.H, enc.H));
      },
      s.store, 1e-5);
  CHECK(err <= 1e-4);
}

TEST_CASE("window width is configurable") {
  Setup s = make_setup({"a", "b", "c", "d"}, EncoderKind::Window, 31);
  s.cfg.encoder_window = 2;
  ParamStore wide;
  declare_encoder_params(wide, s.cfg, s.table);
  wide.initialize(1);
  CHECK(wide.value("enc.win.w").cols() == 5 * s.cfg.embedding_dim);
  Tape tape(&wide);
  const EncodedSentence enc =
      encode(tape, make_instance({"a", "b", "c", "d"}, 0, 1), s.table, wide, s.cfg);
  CHECK(tape.value(enc.H).rows() == 5);
}
