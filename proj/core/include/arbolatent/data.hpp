#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "arbolatent/tensor.hpp"

namespace arbolatent {

enum class Polarity : int { Positive = 0, Neutral = 1, Negative = 2 };

Polarity polarity_from_string(const std::string& s);  // throws ValidationError
const char* to_string(Polarity p);

constexpr int kParseRoot = -1;

// One (sentence, aspect span, polarity) classification unit.
struct Instance {
  std::string id;
  std::vector<std::string> tokens;
  std::size_t aspect_begin = 0;  // half-open token range [begin, end)
  std::size_t aspect_end = 0;
  Polarity polarity = Polarity::Neutral;
  std::optional<std::vector<int>> parse_heads;  // -1 marks the parse root

  std::size_t aspect_len() const { return aspect_end - aspect_begin; }
};

// Throws ValidationError naming the instance id on any invariant violation.
void validate_instance(const Instance& inst);

// One JSON object per line: tokens, aspect_span, polarity, optional
// parse_heads, optional id (autogenerated from the line number when absent).
std::vector<Instance> load_jsonl(const std::string& path);

// Inverse of load_jsonl for one instance.
std::string serialize_instance(const Instance& inst);
void save_jsonl(const std::string& path, const std::vector<Instance>& instances);

// Seeded shuffle, then round(n * dev_fraction) instances go to dev.
std::pair<std::vector<Instance>, std::vector<Instance>> split(const std::vector<Instance>& instances,
                                                              double dev_fraction,
                                                              std::uint64_t seed);

struct PolarityCounts {
  std::array<std::size_t, 3> counts{};  // indexed by Polarity
  std::size_t total() const { return counts[0] + counts[1] + counts[2]; }
};

PolarityCounts stats(const std::vector<Instance>& instances);

struct Lexicon {
  std::unordered_set<std::string> positive;
  std::unordered_set<std::string> negative;

  bool contains(const std::string& lowercase_word) const {
    return positive.count(lowercase_word) != 0 || negative.count(lowercase_word) != 0;
  }
};

// JSON file {"positive": [...], "negative": [...]}; words lowercased; a word
// in both sets is an error.
Lexicon load_lexicon(const std::string& path);

// Word -> row mapping plus initial vectors. Rows 0..2 are reserved for UNK,
// PAD and NODE0. The trainable copy of the values lives in the ParamStore;
// this table keeps the vocabulary and the initialization.
class EmbeddingTable {
 public:
  static constexpr const char* kUnk = "<unk>";
  static constexpr const char* kPad = "<pad>";
  static constexpr const char* kNode0 = "<node0>";

  // Text format, one line per word: "word v1 ... vd". Reserved vectors are
  // drawn from seeded uniform(-0.1, 0.1) when the file does not provide them.
  // Duplicate words keep the first occurrence (duplicate count reported via
  // warnings()).
  static EmbeddingTable load(const std::string& path, std::size_t dimension, std::uint64_t seed = 12345);

  // Random table over a vocabulary (plus the reserved words), uniform(-0.1, 0.1).
  static EmbeddingTable random(std::vector<std::string> words, std::size_t dimension, std::uint64_t seed);

  // Vocabulary only, zero vectors (used when loading a snapshot).
  static EmbeddingTable from_words(std::vector<std::string> words, std::size_t dimension);

  std::size_t dimension() const { return dim_; }
  std::size_t rows() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  std::size_t unk_row() const { return 0; }
  std::size_t pad_row() const { return 1; }
  std::size_t node0_row() const { return 2; }

  // Row for a token; applies lowercasing when `lowercase`, falls back to UNK.
  std::size_t row(const std::string& word, bool lowercase = true) const;

  Tensor to_tensor() const;  // {rows, dim} initial values

  std::size_t duplicate_count() const { return duplicates_; }

  EmbeddingTable() = default;

 private:
  void push_word(const std::string& word, const std::vector<double>& vec);

  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> values_;  // row-major {rows, dim}
  std::size_t duplicates_ = 0;
};

// Sorted unique lowercase token vocabulary of a dataset.
std::vector<std::string> collect_vocabulary(const std::vector<Instance>& instances, bool lowercase = true);

std::string lowercased(const std::string& s);

}  // namespace arbolatent
