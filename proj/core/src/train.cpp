#include "arbolatent/train.hpp"

#include <cmath>
#include <string>

#include "arbolatent/error.hpp"
#include "arbolatent/parallel.hpp"
#include "arbolatent/rng.hpp"

namespace arbolatent {

AdamOptimizer::AdamOptimizer(const RunConfig& cfg)
    : lr_(cfg.learning_rate), beta1_(cfg.adam_beta1), beta2_(cfg.adam_beta2), eps_(cfg.adam_eps) {}

void AdamOptimizer::step(ParamStore& store) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : store.params()) {
    Tensor& m = m_.try_emplace(name, Tensor(p.value.shape())).first->second;
    Tensor& v = v_.try_emplace(name, Tensor(p.value.shape())).first->second;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
}

namespace {

std::vector<double> dropout_mask(std::size_t m, double p, std::uint64_t seed) {
  std::vector<double> mask(m, 1.0);
  if (p <= 0.0) return mask;
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& x : mask) x = rng.bernoulli(p) ? 0.0 : keep_scale;
  return mask;
}

struct InstancePass {
  GradMap grads;
  double loss_a = 0.0, loss_s = 0.0, mass = 0.0;
};

}  // namespace

TrainResult train(const std::vector<Instance>& train_set, const std::vector<Instance>& dev_set,
                  const EmbeddingTable& table, const RunConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("empty training set");

  ParamStore store;
  declare_model_params(store, cfg, table);
  store.initialize(cfg.seed);
  AdamOptimizer opt(cfg);

  TrainResult result;
  result.best_params = store.clone();

  Rng shuffle_rng(mix_seed(cfg.seed, 0x7261696eULL, 0));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double sum_loss_a = 0.0, sum_loss_s = 0.0, sum_mass = 0.0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (start == end) throw ValidationError("empty batch");
      const std::size_t batch = end - start;
      std::vector<InstancePass> passes(batch);

      try {
        parallel_for(batch, [&](std::size_t b) {
          const std::size_t idx = order[start + b];
          const Instance& inst = train_set[idx];
          Tape tape(&store);
          ForwardOptions opts;
          std::vector<double> mask;
          if (cfg.dropout > 0.0) {
            mask = dropout_mask(inst.tokens.size() + 1, cfg.dropout, mix_seed(cfg.seed, epoch, idx));
            opts.row_dropout = &mask;
          }
          const ForwardResult fwd = model_forward(tape, inst, table, store, cfg, opts);
          InstancePass& pass = passes[b];
          pass.grads = tape.backward_collect(fwd.loss);
          pass.loss_a = fwd.loss_a_value;
          pass.loss_s = fwd.loss_s_value;
          pass.mass = fwd.aspect_root_mass;
        });
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(start / cfg.batch_size) + ": " + e.what());
      }

      store.zero_grads();
      const double inv_batch = 1.0 / static_cast<double>(batch);
      for (const InstancePass& pass : passes) {  // index order: deterministic reduction
        for (const auto& [name, g] : pass.grads) {
          Tensor& dst = store.grad(name);
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * inv_batch;
        }
        sum_loss_a += pass.loss_a;
        sum_loss_s += pass.loss_s;
        sum_mass += pass.mass;
      }
      opt.step(store);
    }

    EpochLog entry;
    entry.epoch = epoch;
    const double inv_n = 1.0 / static_cast<double>(train_set.size());
    entry.loss_a = sum_loss_a * inv_n;
    entry.loss_s = sum_loss_s * inv_n;
    entry.aspect_root_mass = sum_mass * inv_n;
    if (!dev_set.empty()) {
      const EvalReport dev = evaluate(store, dev_set, table, cfg);
      entry.dev_acc = dev.accuracy;
      entry.dev_macro_f1 = dev.macro_f1;
    }
    result.log.push_back(entry);

    const double metric =
        cfg.metric == SelectionMetric::Accuracy ? entry.dev_acc : entry.dev_macro_f1;
    if (result.best_epoch == 0 || metric > result.best_metric) {
      result.best_epoch = epoch;
      result.best_metric = metric;
      result.best_params = store.clone();
    }
  }
  return result;
}

std::vector<int> predict(ParamStore& params, const std::vector<Instance>& dataset,
                         const EmbeddingTable& table, const RunConfig& cfg,
                         std::optional<int> prune_k) {
  std::vector<int> out(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t i) {
    Tape tape(&params);
    ForwardOptions opts;
    opts.prune_k = prune_k;
    opts.want_loss = false;
    out[i] = model_forward(tape, dataset[i], table, params, cfg, opts).predicted;
  });
  return out;
}

EvalReport evaluate(ParamStore& params, const std::vector<Instance>& dataset,
                    const EmbeddingTable& table, const RunConfig& cfg, std::optional<int> prune_k) {
  if (dataset.empty()) throw ValidationError("evaluate on empty dataset");
  std::vector<Polarity> gold;
  gold.reserve(dataset.size());
  for (const Instance& inst : dataset) gold.push_back(inst.polarity);
  return compute_metrics(gold, predict(params, dataset, table, cfg, prune_k));
}

double mean_aspect_root_mass(ParamStore& params, const std::vector<Instance>& dataset,
                             const EmbeddingTable& table, const RunConfig& cfg) {
  if (dataset.empty()) throw ValidationError("empty dataset");
  std::vector<double> mass(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t i) {
    Tape tape(&params);
    ForwardOptions opts;
    opts.want_loss = false;
    mass[i] = model_forward(tape, dataset[i], table, params, cfg, opts).aspect_root_mass;
  });
  double sum = 0.0;
  for (double x : mass) sum += x;
  return sum / static_cast<double>(dataset.size());
}

std::vector<InducedTree> induce_trees(ParamStore& params, const std::vector<Instance>& dataset,
                                      const EmbeddingTable& table, const RunConfig& cfg) {
  std::vector<InducedTree> out(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t i) {
    Tape tape(&params);
    ForwardOptions opts;
    opts.want_loss = false;
    const ForwardResult fwd = model_forward(tape, dataset[i], table, params, cfg, opts);
    out[i].tree = cle_extract(fwd.marginals);
    out[i].root_p = fwd.marginals.root_p;
  });
  return out;
}

TreeBank to_tree_bank(const std::vector<InducedTree>& trees) {
  TreeBank bank;
  bank.includes_synthetic = true;
  bank.trees.reserve(trees.size());
  for (const InducedTree& t : trees) bank.trees.emplace_back(t.tree);
  return bank;
}

}  // namespace arbolatent
