#include "arbolatent/classifier.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "arbolatent/error.hpp"

namespace arbolatent {

Var classify(Tape& tape, Var s0, ParamStore& params) {
  for (const char* name : {"cls.w", "cls.b"}) {
    if (!params.contains(name)) throw ValidationError(std::string("missing parameter: ") + name);
  }
  const Var logits = tape.add(tape.matmul(tape.param("cls.w"), s0), tape.param("cls.b"));
  return tape.softmax_rows(logits);
}

Var sentiment_loss(Tape& tape, Var probs, Polarity gold) {
  const Tensor& p = tape.value(probs);
  if (p.size() != 3) throw ShapeError("sentiment_loss expects a 3-class distribution");
  Tensor onehot({3});
  onehot[static_cast<std::size_t>(static_cast<int>(gold))] = 1.0;
  const Var picked = tape.mul(tape.constant(std::move(onehot)), tape.log(tape.clamp(probs, 1e-12, 1.0)));
  return tape.scale(tape.sum(picked), -1.0);
}

Var combined_loss(Tape& tape, Var loss_a, Var loss_s, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha out of range (0,1)");
  return tape.add(tape.scale(loss_a, alpha), tape.scale(loss_s, 1.0 - alpha));
}

void declare_classifier_params(ParamStore& store, const RunConfig& cfg) {
  store.declare("cls.w", {3, cfg.encoder_dim}, {InitKind::Glorot, 0.0});
  store.declare("cls.b", {3}, {InitKind::Zeros, 0.0});
}

int argmax_class(const Tensor& probs) {
  int best = 0;
  for (int c = 1; c < 3; ++c) {
    if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(best)]) best = c;
  }
  return best;
}

EvalReport compute_metrics(const std::vector<Polarity>& gold, const std::vector<int>& predicted) {
  if (gold.size() != predicted.size()) throw ValidationError("gold/predicted length mismatch");
  EvalReport rep;
  rep.total = gold.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = static_cast<std::size_t>(static_cast<int>(gold[i]));
    const auto p = static_cast<std::size_t>(predicted[i]);
    rep.confusion[g][p]++;
    if (g == p) ++correct;
  }
  rep.accuracy = rep.total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(rep.total);

  double f1_sum = 0.0;
  std::size_t f1_classes = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t tp = rep.confusion[c][c], gold_count = 0, pred_count = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      gold_count += rep.confusion[c][k];
      pred_count += rep.confusion[k][c];
    }
    rep.precision[c] = pred_count == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred_count);
    rep.recall[c] = gold_count == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(gold_count);
    const double pr = rep.precision[c] + rep.recall[c];
    rep.f1[c] = pr == 0.0 ? 0.0 : 2.0 * rep.precision[c] * rep.recall[c] / pr;
    if (gold_count == 0 && pred_count == 0) continue;  // absent class: excluded from the mean
    f1_sum += rep.f1[c];
    ++f1_classes;
  }
  rep.macro_f1 = f1_classes == 0 ? 0.0 : f1_sum / static_cast<double>(f1_classes);
  return rep;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "accuracy %.4f  macro_f1 %.4f  (n=%zu)\n", accuracy, macro_f1, total);
  os << buf;
  static const char* names[3] = {"positive", "neutral", "negative"};
  for (std::size_t c = 0; c < 3; ++c) {
    std::snprintf(buf, sizeof buf, "  %-8s P %.4f  R %.4f  F1 %.4f\n", names[c], precision[c],
                  recall[c], f1[c]);
    os << buf;
  }
  os << "  confusion (rows gold, cols predicted):\n";
  for (std::size_t g = 0; g < 3; ++g) {
    os << "   ";
    for (std::size_t p = 0; p < 3; ++p) os << ' ' << confusion[g][p];
    os << '\n';
  }
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json obj;
  obj["accuracy"] = accuracy;
  obj["macro_f1"] = macro_f1;
  obj["precision"] = precision;
  obj["recall"] = recall;
  obj["f1"] = f1;
  obj["confusion"] = confusion;
  obj["total"] = total;
  return obj.dump();
}

}  // namespace arbolatent
