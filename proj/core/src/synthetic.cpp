#include "arbolatent/synthetic.hpp"

#include <string>

#include "arbolatent/rng.hpp"

namespace arbolatent {

namespace {

const std::vector<std::vector<std::string>> kAspects = {
    {"food"},          {"service"}, {"battery"}, {"screen"},  {"staff"},
    {"pizza"},         {"keyboard"}, {"price"},  {"battery", "life"}, {"wine", "list"},
};

const std::vector<std::vector<std::string>> kOpinions = {
    {"great", "excellent", "delicious", "amazing", "fresh"},     // positive
    {"okay", "average", "ordinary", "plain", "standard"},        // neutral
    {"awful", "terrible", "rude", "bad", "worst"},               // negative
};

const std::vector<std::string> kFillers = {
    "a",     "but",  "so",    "very",   "place", "visit",     "time", "experience",
    "meal",  "day",  "this",  "that",   "with",  "yesterday", "crowd", "corner",
    "table", "menu", "slightly", "somehow",
};

// {A} aspect span, {O} opinion word, {F} filler draw
const std::vector<std::vector<std::string>> kTemplates = {
    {"the", "{A}", "was", "{O}"},
    {"the", "{A}", "was", "really", "{O}", "{F}", "{F}"},
    {"i", "think", "the", "{A}", "is", "{O}", "overall"},
    {"{O}", "{A}", "here", "{F}", "{F}"},
    {"the", "{F}", "and", "the", "{A}", "seemed", "{O}", "to", "us"},
    {"honestly", "the", "{A}", "looked", "{O}", "again", "{F}"},
    {"the", "{A}", "{F}", "{F}", "was", "{O}"},
    {"{F}", "{F}", "the", "{A}", "was", "{O}", "and", "{F}"},
};

}  // namespace

std::vector<Instance> make_synthetic_corpus(std::size_t count, std::uint64_t seed) {
  std::vector<Instance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, 0x73796e74ULL, i));
    const auto label = static_cast<int>(rng.below(3));
    const auto& aspect = kAspects[static_cast<std::size_t>(rng.below(kAspects.size()))];
    const auto& opinion_set = kOpinions[static_cast<std::size_t>(label)];
    const std::string& opinion = opinion_set[static_cast<std::size_t>(rng.below(opinion_set.size()))];
    const auto& tmpl = kTemplates[static_cast<std::size_t>(rng.below(kTemplates.size()))];

    Instance inst;
    inst.id = "synth-" + std::to_string(i);
    inst.polarity = static_cast<Polarity>(label);
    for (const std::string& slot : tmpl) {
      if (slot == "{A}") {
        inst.aspect_begin = inst.tokens.size();
        for (const std::string& w : aspect) inst.tokens.push_back(w);
        inst.aspect_end = inst.tokens.size();
      } else if (slot == "{O}") {
        inst.tokens.push_back(opinion);
      } else if (slot == "{F}") {
        inst.tokens.push_back(kFillers[static_cast<std::size_t>(rng.below(kFillers.size()))]);
      } else {
        inst.tokens.push_back(slot);
      }
    }
    validate_instance(inst);
    out.push_back(std::move(inst));
  }
  return out;
}

Lexicon synthetic_lexicon() {
  Lexicon lex;
  for (const std::string& w : kOpinions[0]) lex.positive.insert(w);
  for (const std::string& w : kOpinions[2]) lex.negative.insert(w);
  return lex;
}

}  // namespace arbolatent
