#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "arbolatent/data.hpp"
#include "arbolatent/error.hpp"
#include "arbolatent/synthetic.hpp"

using namespace arbolatent;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "arbolatent-data-test";
  fs::create_directories(dir);
  return dir;
}

fs::path write_temp(const std::string& name, const std::string& content) {
  const fs::path p = temp_dir() / name;
  std::ofstream out(p);
  out << content;
  return p;
}

}  // namespace

TEST_CASE("load_jsonl parses a minimal valid line") {
  const auto p = write_temp("min.jsonl",
                            R"({"tokens":["great","food"],"aspect_span":[1,2],"polarity":"positive"})"
                            "\n");
  const auto instances = load_jsonl(p.string());
  REQUIRE(instances.size() == 1);
  CHECK(instances[0].tokens.size() == 2);
  CHECK(instances[0].aspect_begin == 1);
  CHECK(instances[0].aspect_end == 2);
  CHECK(instances[0].tokens[instances[0].aspect_begin] == "food");
  CHECK(instances[0].polarity == Polarity::Positive);
  CHECK(instances[0].id == "1");  // autogenerated from the line number
  CHECK(!instances[0].parse_heads);
}

TEST_CASE("empty aspect span is rejected") {
  const auto p = write_temp("empty-span.jsonl",
                            R"({"tokens":["a","b","c"],"aspect_span":[2,2],"polarity":"neutral"})"
                            "\n");
  try {
    (void)load_jsonl(p.string());
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("empty aspect span") != std::string::npos);
  }
}

TEST_CASE("two parse roots are rejected") {
  const auto p = write_temp(
      "two-roots.jsonl",
      R"({"tokens":["a","b"],"aspect_span":[0,1],"polarity":"neutral","parse_heads":[-1,-1]})"
      "\n");
  try {
    (void)load_jsonl(p.string());
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("multiple parse roots") != std::string::npos);
  }
}

TEST_CASE("parse head cycles are rejected") {
  const auto p = write_temp(
      "cycle.jsonl",
      R"({"tokens":["a","b","c"],"aspect_span":[0,1],"polarity":"neutral","parse_heads":[-1,2,1]})"
      "\n");
  CHECK_THROWS_AS((void)load_jsonl(p.string()), ValidationError);
}

TEST_CASE("malformed JSON reports the line number") {
  const auto p = write_temp("bad.jsonl",
                            R"({"tokens":["x"],"aspect_span":[0,1],"polarity":"neutral"})"
                            "\n{oops\n");
  try {
    (void)load_jsonl(p.string());
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("unknown polarity strings are rejected") {
  const auto p = write_temp("polarity.jsonl",
                            R"({"tokens":["x"],"aspect_span":[0,1],"polarity":"meh"})"
                            "\n");
  CHECK_THROWS_AS((void)load_jsonl(p.string()), ValidationError);
}

TEST_CASE("serialize then load is the identity on valid instances") {
  auto corpus = make_synthetic_corpus(40, 99);
  corpus[0].parse_heads = std::vector<int>(corpus[0].tokens.size(), 0);
  (*corpus[0].parse_heads)[0] = kParseRoot;
  const auto p = temp_dir() / "round.jsonl";
  save_jsonl(p.string(), corpus);
  const auto loaded = load_jsonl(p.string());
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded[i].id == corpus[i].id);
    CHECK(loaded[i].tokens == corpus[i].tokens);
    CHECK(loaded[i].aspect_begin == corpus[i].aspect_begin);
    CHECK(loaded[i].aspect_end == corpus[i].aspect_end);
    CHECK(loaded[i].polarity == corpus[i].polarity);
    CHECK(loaded[i].parse_heads == corpus[i].parse_heads);
  }
}

TEST_CASE("split partitions deterministically") {
  const auto corpus = make_synthetic_corpus(10, 3);
  auto [train1, dev1] = split(corpus, 0.1, 42);
  auto [train2, dev2] = split(corpus, 0.1, 42);
  CHECK(train1.size() == 9);
  CHECK(dev1.size() == 1);
  REQUIRE(train2.size() == train1.size());
  for (std::size_t i = 0; i < train1.size(); ++i) CHECK(train1[i].id == train2[i].id);
  CHECK(dev1[0].id == dev2[0].id);

  std::set<std::string> all, seen;
  for (const auto& inst : corpus) all.insert(inst.id);
  for (const auto& inst : train1) seen.insert(inst.id);
  for (const auto& inst : dev1) {
    CHECK(seen.count(inst.id) == 0);  // disjoint
    seen.insert(inst.id);
  }
  CHECK(seen == all);  // exhaustive
}

TEST_CASE("split dev size is round(n * fraction)") {
  const auto corpus = make_synthetic_corpus(2620, 5);
  auto [train, dev] = split(corpus, 0.1, 1);
  CHECK(dev.size() == 262);
  CHECK(train.size() == 2620 - 262);
}

TEST_CASE("split needs at least two instances") {
  CHECK_THROWS_AS((void)split(make_synthetic_corpus(1, 1), 0.1, 1), ValidationError);
  CHECK_THROWS_AS((void)split(make_synthetic_corpus(4, 1), 1.5, 1), ValidationError);
}

TEST_CASE("stats counts per polarity") {
  CHECK(stats({}).total() == 0);

  std::vector<Instance> three;
  for (int c = 0; c < 3; ++c) {
    Instance inst;
    inst.id = std::to_string(c);
    inst.tokens = {"w"};
    inst.aspect_begin = 0;
    inst.aspect_end = 1;
    inst.polarity = static_cast<Polarity>(c);
    three.push_back(inst);
  }
  const PolarityCounts counts = stats(three);
  CHECK(counts.counts[0] == 1);
  CHECK(counts.counts[1] == 1);
  CHECK(counts.counts[2] == 1);

  const auto corpus = make_synthetic_corpus(200, 11);
  CHECK(stats(corpus).total() == corpus.size());
}

TEST_CASE("embedding table loads and falls back to UNK") {
  const auto p = write_temp("emb.txt", "the 0.1 0.2\nfood -0.5 0.25\n");
  const EmbeddingTable table = EmbeddingTable::load(p.string(), 2);
  CHECK(table.dimension() == 2);
  const Tensor t = table.to_tensor();
  const std::size_t the_row = table.row("the");
  CHECK(t.at(the_row, 0) == doctest::Approx(0.1));
  CHECK(t.at(the_row, 1) == doctest::Approx(0.2));
  CHECK(table.row("unseen-word") == table.unk_row());
  CHECK(table.row("THE") == the_row);  // lowercase lookup
  // reserved vectors initialized away from zero
  bool nonzero = false;
  for (std::size_t j = 0; j < 2; ++j) nonzero |= t.at(table.unk_row(), j) != 0.0;
  CHECK(nonzero);
}

TEST_CASE("embedding dimension mismatch names the word") {
  const auto p = write_temp("emb-bad.txt", "the 0.1 0.2 0.3\n");
  try {
    (void)EmbeddingTable::load(p.string(), 2);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("\"the\"") != std::string::npos);
  }
}

TEST_CASE("duplicate embedding words keep the first vector") {
  const auto p = write_temp("emb-dup.txt", "the 1 1\nthe 2 2\n");
  const EmbeddingTable table = EmbeddingTable::load(p.string(), 2);
  CHECK(table.duplicate_count() == 1);
  CHECK(table.to_tensor().at(table.row("the"), 0) == doctest::Approx(1.0));
}

TEST_CASE("random embedding tables are seeded and deterministic") {
  const std::vector<std::string> vocab = {"b", "a", "c"};
  const EmbeddingTable t1 = EmbeddingTable::random(vocab, 4, 9);
  const EmbeddingTable t2 = EmbeddingTable::random(vocab, 4, 9);
  CHECK(t1.to_tensor() == t2.to_tensor());
  CHECK(t1.rows() == 6);  // three reserved + three words
}

TEST_CASE("lexicon loads, lowercases and rejects overlap") {
  const auto p = write_temp("lex.json", R"({"positive":["Great","fresh"],"negative":["awful"]})");
  const Lexicon lex = load_lexicon(p.string());
  CHECK(lex.positive.count("great") == 1);
  CHECK(lex.contains("awful"));
  CHECK(!lex.contains("meh"));

  const auto bad = write_temp("lex-bad.json", R"({"positive":["fine"],"negative":["fine"]})");
  CHECK_THROWS_AS((void)load_lexicon(bad.string()), ValidationError);
}
