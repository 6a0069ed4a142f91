#include "arbolatent/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "arbolatent/autodiff.hpp"
#include "arbolatent/model.hpp"
#include "arbolatent/rng.hpp"
#include "arbolatent/tree_tools.hpp"

namespace arbolatent {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

ScoreSet random_score_set(std::size_t m, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  ScoreSet s;
  s.E = Tensor({m, m});
  s.r = Tensor({m});
  for (std::size_t i = 0; i < s.E.size(); ++i) s.E[i] = rng.uniform(lo, hi);
  for (std::size_t i = 0; i < m; ++i) s.r[i] = rng.uniform(lo, hi);
  return s;
}

PropertyResult check_oracle_equivalence(std::size_t max_m, std::size_t sets_per_m, double tol,
                                        std::uint64_t seed) {
  PropertyResult res{"oracle-equivalence", true, ""};
  double worst = 0.0;
  for (std::size_t m = 2; m <= max_m; ++m) {
    for (std::size_t c = 0; c < sets_per_m; ++c) {
      const ScoreSet s = random_score_set(m, mix_seed(seed, m, c));
      const TreeMarginals fast = mtt_marginals(s);
      const TreeMarginals slow = oracle_marginals(s);
      worst = std::max(worst, max_abs_diff(fast.P, slow.P));
      worst = std::max(worst, max_abs_diff(fast.root_p, slow.root_p));
    }
  }
  res.pass = worst <= tol;
  res.detail = fmt("max |mtt - oracle| = %.3e", worst);
  return res;
}

PropertyResult check_normalization(std::size_t cases, std::size_t max_m, double tol,
                                   std::uint64_t seed) {
  PropertyResult res{"normalization", true, ""};
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t m = 1 + c % max_m;
    const ScoreSet s = random_score_set(m, mix_seed(seed, 0x6e6f726dULL, c));
    const TreeMarginals mg = mtt_marginals(s);
    double root_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) root_sum += mg.root_p[i];
    worst = std::max(worst, std::abs(root_sum - 1.0));
    for (std::size_t j = 0; j < m; ++j) {
      double head_sum = mg.root_p[j];
      for (std::size_t i = 0; i < m; ++i) head_sum += mg.P.at(i, j);
      worst = std::max(worst, std::abs(head_sum - 1.0));
    }
  }
  res.pass = worst <= tol;
  res.detail = fmt("max |identity residual| = %.3e", worst);
  return res;
}

PropertyResult check_shift_invariance(std::size_t cases, double tol, std::uint64_t seed) {
  PropertyResult res{"shift-invariance", true, ""};
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t m = 2 + c % 6;
    ScoreSet s = random_score_set(m, mix_seed(seed, 0x73686674ULL, c));
    Rng rng(mix_seed(seed, 0x73686674ULL, c + 1000003));
    const double shift = rng.uniform(-50.0, 50.0);
    const TreeMarginals base = mtt_marginals(s);
    for (std::size_t i = 0; i < s.E.size(); ++i) s.E[i] += shift;
    for (std::size_t i = 0; i < m; ++i) s.r[i] += shift;
    const TreeMarginals shifted = mtt_marginals(s);
    worst = std::max(worst, max_abs_diff(base.P, shifted.P));
    worst = std::max(worst, max_abs_diff(base.root_p, shifted.root_p));
  }
  res.pass = worst <= tol;
  res.detail = fmt("max marginal change = %.3e", worst);
  return res;
}

PropertyResult check_cle_optimality(std::size_t cases_per_m, std::size_t max_m, std::uint64_t seed) {
  PropertyResult res{"cle-optimality", true, ""};
  double worst = 0.0;
  for (std::size_t m = 2; m <= max_m; ++m) {
    for (std::size_t c = 0; c < cases_per_m; ++c) {
      Rng rng(mix_seed(seed, 0x636c65ULL + m, c));
      Tensor w({m, m});
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.0, 1.0);
      // exhaustive best score per root
      std::vector<double> best(m, -std::numeric_limits<double>::infinity());
      for (const auto& [root, heads] : enumerate_arborescences(m)) {
        double score = 0.0;
        for (std::size_t v = 0; v < m; ++v) {
          if (heads[v] == kRootHead) continue;
          score += w.at(static_cast<std::size_t>(heads[v]), v);
        }
        best[static_cast<std::size_t>(root)] = std::max(best[static_cast<std::size_t>(root)], score);
      }
      for (std::size_t root = 0; root < m; ++root) {
        const Arborescence tree = max_arborescence(w, static_cast<int>(root));
        worst = std::max(worst, std::abs(tree.score - best[root]));
      }
    }
  }
  res.pass = worst <= 1e-9;
  res.detail = fmt("max |cle - exhaustive| = %.3e", worst);
  return res;
}

PropertyResult check_cle_fuzz(std::size_t cases, std::size_t max_m, std::uint64_t seed) {
  PropertyResult res{"cle-invariants", true, ""};
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t m = 1 + c % max_m;
    Rng rng(mix_seed(seed, 0x66757a7aULL, c));
    TreeMarginals mg;
    mg.P = Tensor({m, m});
    mg.root_p = Tensor({m});
    for (std::size_t i = 0; i < mg.P.size(); ++i) mg.P[i] = rng.uniform(0.0, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
      mg.P.at(i, i) = 0.0;
      mg.root_p[i] = rng.uniform(0.0, 1.0);
    }
    try {
      const Arborescence tree = cle_extract(mg);
      validate_arborescence(tree);
    } catch (const Error& e) {
      res.pass = false;
      res.detail = std::string("case ") + std::to_string(c) + ": " + e.what();
      return res;
    }
  }
  res.detail = std::to_string(cases) + " decoded trees valid";
  return res;
}

Fixture make_fixture(std::size_t instance_count, std::size_t min_tokens, std::size_t max_tokens,
                     std::size_t dim, std::uint64_t seed) {
  std::vector<std::string> vocab;
  for (char c = 'a'; c <= 'j'; ++c) vocab.emplace_back(1, c);
  Fixture fx{{}, EmbeddingTable::random(vocab, dim, mix_seed(seed, 0x746162ULL, 0))};
  Rng rng(mix_seed(seed, 0x66697874ULL, 1));
  for (std::size_t i = 0; i < instance_count; ++i) {
    Instance inst;
    inst.id = "fixture-" + std::to_string(i);
    const std::size_t n = min_tokens + rng.below(max_tokens - min_tokens + 1);
    for (std::size_t t = 0; t < n; ++t) {
      inst.tokens.push_back(vocab[static_cast<std::size_t>(rng.below(vocab.size()))]);
    }
    inst.aspect_begin = static_cast<std::size_t>(rng.below(n));
    const std::size_t max_len = std::min<std::size_t>(2, n - inst.aspect_begin);
    inst.aspect_end = inst.aspect_begin + 1 + rng.below(max_len);
    inst.polarity = static_cast<Polarity>(rng.below(3));
    validate_instance(inst);
    fx.instances.push_back(std::move(inst));
  }
  return fx;
}

PropertyResult check_grad_full_loss(std::size_t instance_count, double tol, std::uint64_t seed) {
  PropertyResult res{"grad-check-combined-loss", true, ""};
  const std::size_t dim = 12;
  const Fixture fx = make_fixture(instance_count, 4, 6, dim, seed);
  RunConfig cfg;
  cfg.encoder_dim = dim;
  cfg.embedding_dim = dim;
  cfg.dropout = 0.0;
  cfg.alpha = 0.5;

  double worst = 0.0;
  for (std::size_t i = 0; i < fx.instances.size(); ++i) {
    ParamStore store;
    declare_model_params(store, cfg, fx.table);
    store.initialize(mix_seed(seed, 0x696e6974ULL, i));
    const Instance& inst = fx.instances[i];
    const double err = grad_check(
        [&](Tape& tape, ParamStore& s) { return model_forward(tape, inst, fx.table, s, cfg).loss; },
        store, 1e-5);
    worst = std::max(worst, err);
  }
  res.pass = worst <= tol;
  res.detail = fmt("max relative gradient error = %.3e", worst);
  return res;
}

std::vector<PropertyResult> run_verification(std::size_t max_n, std::uint64_t seed) {
  std::vector<PropertyResult> out;
  out.push_back(check_oracle_equivalence(std::min<std::size_t>(max_n, 5), 50, 1e-8, seed));
  out.push_back(check_normalization(200, 8, 1e-8, seed));
  out.push_back(check_shift_invariance(50, 1e-10, seed));
  out.push_back(check_cle_optimality(100, std::min<std::size_t>(max_n + 1, 6), seed));
  out.push_back(check_cle_fuzz(100, 10, seed));
  out.push_back(check_grad_full_loss(2, 1e-4, seed));
  return out;
}

}  // namespace arbolatent
