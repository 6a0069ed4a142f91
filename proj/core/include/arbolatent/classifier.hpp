#pragma once

#include <array>
#include <string>
#include <vector>

#include "arbolatent/config.hpp"
#include "arbolatent/data.hpp"
#include "arbolatent/tape.hpp"

namespace arbolatent {

// y = softmax(W_p s0 + b_p), a distribution over (positive, neutral, negative).
Var classify(Tape& tape, Var s0, ParamStore& params);

// -log(probs[gold]) with the probability clamped at 1e-12.
Var sentiment_loss(Tape& tape, Var probs, Polarity gold);

// alpha * L_a + (1 - alpha) * L_s.
Var combined_loss(Tape& tape, Var loss_a, Var loss_s, double alpha);

void declare_classifier_params(ParamStore& store, const RunConfig& cfg);

int argmax_class(const Tensor& probs);  // ties -> lowest class index

struct EvalReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<double, 3> precision{};
  std::array<double, 3> recall{};
  std::array<double, 3> f1{};
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [gold][predicted]
  std::size_t total = 0;

  std::string to_text() const;
  std::string to_json() const;
};

// Metrics from aligned gold/predicted labels. A class with zero gold and zero
// predicted instances is excluded from the macro-F1 mean; otherwise F1 = 0
// counts.
EvalReport compute_metrics(const std::vector<Polarity>& gold, const std::vector<int>& predicted);

}  // namespace arbolatent
