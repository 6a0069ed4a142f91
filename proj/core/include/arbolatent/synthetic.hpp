#pragma once

#include <cstdint>
#include <vector>

#include "arbolatent/data.hpp"

namespace arbolatent {

// Templated review-style sentences where one lexicon opinion word determines
// the polarity of a marked aspect span. Deterministic in (count, seed).
std::vector<Instance> make_synthetic_corpus(std::size_t count, std::uint64_t seed);

// The positive/negative opinion words the generator draws from.
Lexicon synthetic_lexicon();

}  // namespace arbolatent
