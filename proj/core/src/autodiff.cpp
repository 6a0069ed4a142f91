#include "arbolatent/autodiff.hpp"

#include <cmath>

#include "arbolatent/error.hpp"

namespace arbolatent {

double grad_check(const LossFn& f, ParamStore& store, double step) {
  if (!(step > 0.0 && step <= 1e-2)) throw ValidationError("grad_check step must be in (0, 1e-2]");

  const auto eval = [&]() {
    Tape tape(&store);
    const Var loss = f(tape, store);
    const double v = tape.scalar(loss);
    if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
    return v;
  };

  store.zero_grads();
  {
    Tape tape(&store);
    const Var loss = f(tape, store);
    if (!std::isfinite(tape.scalar(loss))) throw NumericError("grad_check: loss is not finite");
    tape.backward(loss);
  }

  double worst = 0.0;
  for (auto& [name, p] : store.params()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = eval();
      p.value[i] = saved - step;
      const double down = eval();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace arbolatent
