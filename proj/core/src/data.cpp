#include "arbolatent/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "arbolatent/error.hpp"
#include "arbolatent/rng.hpp"

namespace arbolatent {

using nlohmann::json;

Polarity polarity_from_string(const std::string& s) {
  if (s == "positive") return Polarity::Positive;
  if (s == "neutral") return Polarity::Neutral;
  if (s == "negative") return Polarity::Negative;
  throw ValidationError("unknown polarity string: \"" + s + "\"");
}

const char* to_string(Polarity p) {
  switch (p) {
    case Polarity::Positive: return "positive";
    case Polarity::Neutral: return "neutral";
    case Polarity::Negative: return "negative";
  }
  return "?";
}

std::string lowercased(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void validate_instance(const Instance& inst) {
  const auto fail = [&](const std::string& what) {
    throw ValidationError("instance " + inst.id + ": " + what);
  };
  const std::size_t n = inst.tokens.size();
  if (n == 0) fail("empty token list");
  if (inst.aspect_begin >= inst.aspect_end) fail("empty aspect span");
  if (inst.aspect_end > n) fail("aspect span out of range");
  if (inst.parse_heads) {
    const auto& heads = *inst.parse_heads;
    if (heads.size() != n) fail("parse_heads length does not match tokens");
    std::size_t roots = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (heads[i] == kParseRoot) {
        ++roots;
        continue;
      }
      if (heads[i] < 0 || static_cast<std::size_t>(heads[i]) >= n) fail("parse head out of range");
      if (static_cast<std::size_t>(heads[i]) == i) fail("token is its own parse head");
    }
    if (roots == 0) fail("no parse root");
    if (roots > 1) fail("multiple parse roots");
    // acyclic + connected: every node must reach the root
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t cur = i, steps = 0;
      while (heads[cur] != kParseRoot) {
        cur = static_cast<std::size_t>(heads[cur]);
        if (++steps > n) fail("parse head graph contains a cycle");
      }
    }
  }
}

namespace {

Instance instance_from_json(const json& obj, const std::string& fallback_id) {
  Instance inst;
  inst.id = obj.contains("id") ? obj.at("id").get<std::string>() : fallback_id;
  if (!obj.contains("tokens") || !obj.contains("aspect_span") || !obj.contains("polarity")) {
    throw ValidationError("instance " + inst.id + ": missing tokens/aspect_span/polarity");
  }
  inst.tokens = obj.at("tokens").get<std::vector<std::string>>();
  const auto span = obj.at("aspect_span").get<std::vector<std::int64_t>>();
  if (span.size() != 2 || span[0] < 0 || span[1] < 0) {
    throw ValidationError("instance " + inst.id + ": aspect_span must be [begin, end)");
  }
  inst.aspect_begin = static_cast<std::size_t>(span[0]);
  inst.aspect_end = static_cast<std::size_t>(span[1]);
  try {
    inst.polarity = polarity_from_string(obj.at("polarity").get<std::string>());
  } catch (const ValidationError& e) {
    throw ValidationError("instance " + inst.id + ": " + e.what());
  }
  if (obj.contains("parse_heads") && !obj.at("parse_heads").is_null()) {
    inst.parse_heads = obj.at("parse_heads").get<std::vector<int>>();
  }
  validate_instance(inst);
  return inst;
}

}  // namespace

std::vector<Instance> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open instance file: " + path);
  std::vector<Instance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    out.push_back(instance_from_json(obj, std::to_string(line_no)));
  }
  return out;
}

std::string serialize_instance(const Instance& inst) {
  json obj;
  obj["id"] = inst.id;
  obj["tokens"] = inst.tokens;
  obj["aspect_span"] = {inst.aspect_begin, inst.aspect_end};
  obj["polarity"] = to_string(inst.polarity);
  if (inst.parse_heads) obj["parse_heads"] = *inst.parse_heads;
  return obj.dump();
}

void save_jsonl(const std::string& path, const std::vector<Instance>& instances) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write instance file: " + path);
  for (const Instance& inst : instances) out << serialize_instance(inst) << '\n';
}

std::pair<std::vector<Instance>, std::vector<Instance>> split(const std::vector<Instance>& instances,
                                                              double dev_fraction,
                                                              std::uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) {
    throw ValidationError("dev_fraction must be in (0, 1)");
  }
  if (instances.size() < 2) throw ValidationError("need at least 2 instances to split");
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const auto dev_count =
      static_cast<std::size_t>(std::llround(static_cast<double>(instances.size()) * dev_fraction));
  std::vector<Instance> dev, train;
  dev.reserve(dev_count);
  train.reserve(instances.size() - dev_count);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < dev_count ? dev : train).push_back(instances[order[i]]);
  }
  return {std::move(train), std::move(dev)};
}

PolarityCounts stats(const std::vector<Instance>& instances) {
  PolarityCounts out;
  for (const Instance& inst : instances) out.counts[static_cast<int>(inst.polarity)]++;
  return out;
}

Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open lexicon file: " + path);
  json obj;
  try {
    in >> obj;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": malformed JSON: " + std::string(e.what()));
  }
  Lexicon lex;
  for (const auto& w : obj.value("positive", std::vector<std::string>{})) {
    lex.positive.insert(lowercased(w));
  }
  for (const auto& w : obj.value("negative", std::vector<std::string>{})) {
    const std::string lw = lowercased(w);
    if (lex.positive.count(lw)) {
      throw ValidationError("lexicon word in both polarities: \"" + lw + "\"");
    }
    lex.negative.insert(lw);
  }
  return lex;
}

void EmbeddingTable::push_word(const std::string& word, const std::vector<double>& vec) {
  index_.emplace(word, words_.size());
  words_.push_back(word);
  values_.insert(values_.end(), vec.begin(), vec.end());
}

EmbeddingTable EmbeddingTable::load(const std::string& path, std::size_t dimension, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embeddings file: " + path);
  EmbeddingTable table;
  table.dim_ = dimension;
  // reserved rows first; real vectors may overwrite them below
  const std::vector<double> zero(dimension, 0.0);
  table.push_word(kUnk, zero);
  table.push_word(kPad, zero);
  table.push_word(kNode0, zero);

  std::unordered_set<std::string> reserved_seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> vec;
    vec.reserve(dimension);
    double v;
    while (ls >> v) vec.push_back(v);
    if (vec.size() != dimension) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": embedding for \"" + word +
                            "\" has " + std::to_string(vec.size()) + " values, expected " +
                            std::to_string(dimension));
    }
    auto it = table.index_.find(word);
    if (it != table.index_.end()) {
      const bool is_reserved = word == kUnk || word == kPad || word == kNode0;
      if (is_reserved && !reserved_seen.count(word)) {
        reserved_seen.insert(word);
        std::copy(vec.begin(), vec.end(), table.values_.begin() + static_cast<std::ptrdiff_t>(it->second * dimension));
      } else {
        table.duplicates_++;  // keep first
      }
      continue;
    }
    table.push_word(word, vec);
  }
  Rng rng(seed);
  for (std::size_t r : {table.unk_row(), table.pad_row(), table.node0_row()}) {
    const std::string& w = table.words_[r];
    if (reserved_seen.count(w)) continue;
    for (std::size_t j = 0; j < dimension; ++j) table.values_[r * dimension + j] = rng.uniform(-0.1, 0.1);
  }
  return table;
}

EmbeddingTable EmbeddingTable::random(std::vector<std::string> words, std::size_t dimension,
                                      std::uint64_t seed) {
  EmbeddingTable table = from_words(std::move(words), dimension);
  Rng rng(seed);
  for (double& v : table.values_) v = rng.uniform(-0.1, 0.1);
  return table;
}

EmbeddingTable EmbeddingTable::from_words(std::vector<std::string> words, std::size_t dimension) {
  EmbeddingTable table;
  table.dim_ = dimension;
  const std::vector<double> zero(dimension, 0.0);
  table.push_word(kUnk, zero);
  table.push_word(kPad, zero);
  table.push_word(kNode0, zero);
  for (const std::string& w : words) {
    if (table.index_.count(w)) continue;
    table.push_word(w, zero);
  }
  return table;
}

std::size_t EmbeddingTable::row(const std::string& word, bool lowercase) const {
  auto it = index_.find(word);
  if (it != index_.end()) return it->second;
  if (lowercase) {
    it = index_.find(lowercased(word));
    if (it != index_.end()) return it->second;
  }
  return unk_row();
}

Tensor EmbeddingTable::to_tensor() const {
  return Tensor({rows(), dim_}, values_);
}

std::vector<std::string> collect_vocabulary(const std::vector<Instance>& instances, bool lowercase) {
  std::set<std::string> words;
  for (const Instance& inst : instances) {
    for (const std::string& t : inst.tokens) words.insert(lowercase ? lowercased(t) : t);
  }
  return {words.begin(), words.end()};
}

}  // namespace arbolatent
