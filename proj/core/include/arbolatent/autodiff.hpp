#pragma once

#include <functional>

#include "arbolatent/param_store.hpp"
#include "arbolatent/tape.hpp"

namespace arbolatent {

// Builds a scalar loss on the given tape from the current store values.
using LossFn = std::function<Var(Tape&, ParamStore&)>;

// Compares the analytic gradient of f against central finite differences
// (f(x+h) - f(x-h)) / 2h for every parameter entry. Returns the worst relative
// error, with denominator max(|analytic|, |numeric|, 1e-8). The store is
// restored to its original values; its gradient buffers are overwritten.
//
// pre: f deterministic; step in (0, 1e-2].
double grad_check(const LossFn& f, ParamStore& store, double step);

}  // namespace arbolatent
