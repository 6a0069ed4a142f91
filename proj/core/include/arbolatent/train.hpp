#pragma once

#include <map>
#include <optional>
#include <vector>

#include "arbolatent/classifier.hpp"
#include "arbolatent/config.hpp"
#include "arbolatent/data.hpp"
#include "arbolatent/model.hpp"
#include "arbolatent/tree_tools.hpp"

namespace arbolatent {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss_a = 0.0;    // epoch means over training instances
  double loss_s = 0.0;
  double dev_acc = 0.0;
  double dev_macro_f1 = 0.0;
  double aspect_root_mass = 0.0;  // mean sum of aspect-row root marginals
};

struct TrainResult {
  ParamStore best_params;  // snapshot at the best dev epoch (ties: earlier)
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(const RunConfig& cfg);
  void step(ParamStore& store);  // consumes store gradients, in name order

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

// Mini-batch Adam over the combined loss with dev-based model selection.
// Deterministic under a fixed seed/config/data, independent of worker count.
TrainResult train(const std::vector<Instance>& train_set, const std::vector<Instance>& dev_set,
                  const EmbeddingTable& table, const RunConfig& cfg);

EvalReport evaluate(ParamStore& params, const std::vector<Instance>& dataset,
                    const EmbeddingTable& table, const RunConfig& cfg,
                    std::optional<int> prune_k = std::nullopt);

std::vector<int> predict(ParamStore& params, const std::vector<Instance>& dataset,
                         const EmbeddingTable& table, const RunConfig& cfg,
                         std::optional<int> prune_k = std::nullopt);

// Mean over instances of sum_{i in aspect rows} root_p[i], dropout off.
double mean_aspect_root_mass(ParamStore& params, const std::vector<Instance>& dataset,
                             const EmbeddingTable& table, const RunConfig& cfg);

struct InducedTree {
  Arborescence tree;
  Tensor root_p;
};

// CLE-decoded trees from the model's marginals (includes the synthetic node).
std::vector<InducedTree> induce_trees(ParamStore& params, const std::vector<Instance>& dataset,
                                      const EmbeddingTable& table, const RunConfig& cfg);

TreeBank to_tree_bank(const std::vector<InducedTree>& trees);

}  // namespace arbolatent
