#include "arbolatent/tree_tools.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>

#include "arbolatent/error.hpp"

namespace arbolatent {

void validate_arborescence(const Arborescence& tree) {
  const std::size_t m = tree.heads.size();
  if (m == 0) throw ValidationError("empty arborescence");
  if (tree.root < 0 || static_cast<std::size_t>(tree.root) >= m) {
    throw ValidationError("arborescence root out of range");
  }
  std::size_t roots = 0;
  for (std::size_t v = 0; v < m; ++v) {
    if (tree.heads[v] == kRootHead) {
      ++roots;
      if (static_cast<int>(v) != tree.root) throw ValidationError("root sentinel at non-root node");
      continue;
    }
    if (tree.heads[v] < 0 || static_cast<std::size_t>(tree.heads[v]) >= m) {
      throw ValidationError("arborescence head out of range");
    }
  }
  if (roots != 1) throw ValidationError("arborescence must have exactly one root sentinel");
  for (std::size_t v = 0; v < m; ++v) {
    std::size_t cur = v, steps = 0;
    while (tree.heads[cur] != kRootHead) {
      cur = static_cast<std::size_t>(tree.heads[cur]);
      if (++steps > m) throw ValidationError("arborescence contains a cycle");
    }
  }
}

namespace {

constexpr int kUnassigned = -2;

struct CleGraph {
  std::size_t k = 0;
  int root = 0;
  std::vector<double> w;                     // k*k
  std::vector<std::pair<int, int>> orig;     // k*k, original (head, dep)

  double& at(std::size_t u, std::size_t v) { return w[u * k + v]; }
  double at(std::size_t u, std::size_t v) const { return w[u * k + v]; }
};

// Chu-Liu-Edmonds contraction. Assigns original heads for every dependent the
// current graph covers. On contraction, edges into the super node remember
// which cycle label they enter; after the recursion picks the entry edge, the
// entry label's own cycle edge is the one dropped.
void cle_solve(const CleGraph& g, std::vector<int>& heads_out) {
  const std::size_t k = g.k;
  if (k <= 1) return;

  std::vector<int> best(k, -1);
  for (std::size_t v = 0; v < k; ++v) {
    if (static_cast<int>(v) == g.root) continue;
    int bu = -1;
    for (std::size_t u = 0; u < k; ++u) {
      if (u == v) continue;
      if (bu < 0 || g.at(u, v) > g.at(static_cast<std::size_t>(bu), v)) bu = static_cast<int>(u);
    }
    best[v] = bu;
  }

  // cycle detection in the best-edge functional graph
  std::vector<int> color(k, 0);  // 0 new, 1 active, 2 done
  color[static_cast<std::size_t>(g.root)] = 2;
  std::vector<int> cycle;
  for (std::size_t s = 0; s < k && cycle.empty(); ++s) {
    if (color[s] != 0) continue;
    std::size_t cur = s;
    std::vector<std::size_t> path;
    while (color[cur] == 0) {
      color[cur] = 1;
      path.push_back(cur);
      cur = static_cast<std::size_t>(best[cur]);
    }
    if (color[cur] == 1) {
      auto it = std::find(path.begin(), path.end(), cur);
      for (; it != path.end(); ++it) cycle.push_back(static_cast<int>(*it));
    }
    for (std::size_t p : path) color[p] = 2;
  }

  if (cycle.empty()) {
    for (std::size_t v = 0; v < k; ++v) {
      if (static_cast<int>(v) == g.root) continue;
      const auto [h0, d0] = g.orig[static_cast<std::size_t>(best[v]) * k + v];
      heads_out[static_cast<std::size_t>(d0)] = h0;
    }
    return;
  }

  std::vector<std::uint8_t> in_cycle(k, 0);
  for (int v : cycle) in_cycle[static_cast<std::size_t>(v)] = 1;

  // contracted labels: non-cycle nodes in increasing order, super node last
  std::vector<int> to_new(k, -1);
  std::vector<std::size_t> keep;
  for (std::size_t v = 0; v < k; ++v) {
    if (!in_cycle[v]) {
      to_new[v] = static_cast<int>(keep.size());
      keep.push_back(v);
    }
  }
  const std::size_t super = keep.size();

  CleGraph g2;
  g2.k = keep.size() + 1;
  g2.root = to_new[static_cast<std::size_t>(g.root)];
  const double neg = -std::numeric_limits<double>::infinity();
  g2.w.assign(g2.k * g2.k, neg);
  g2.orig.assign(g2.k * g2.k, {0, 0});

  for (std::size_t a = 0; a < keep.size(); ++a) {
    for (std::size_t b = 0; b < keep.size(); ++b) {
      if (a == b) continue;
      g2.w[a * g2.k + b] = g.at(keep[a], keep[b]);
      g2.orig[a * g2.k + b] = g.orig[keep[a] * k + keep[b]];
    }
  }
  const auto better = [](double w1, const std::pair<int, int>& o1, double w2,
                         const std::pair<int, int>& o2) {
    if (w1 != w2) return w1 > w2;
    return o1 < o2;  // lowest (head, dependent) pair wins ties
  };
  std::vector<int> entry_label(keep.size(), -1);  // per head label: cycle label entered
  for (std::size_t a = 0; a < keep.size(); ++a) {
    const std::size_t u = keep[a];
    // u -> cycle: score adjusted by the cycle edge it replaces
    for (int cv : cycle) {
      const auto v = static_cast<std::size_t>(cv);
      const double adj = g.at(u, v) - g.at(static_cast<std::size_t>(best[v]), v);
      if (g2.w[a * g2.k + super] == neg ||
          better(adj, g.orig[u * k + v], g2.w[a * g2.k + super], g2.orig[a * g2.k + super])) {
        g2.w[a * g2.k + super] = adj;
        g2.orig[a * g2.k + super] = g.orig[u * k + v];
        entry_label[a] = cv;
      }
    }
    // cycle -> u
    for (int cu : cycle) {
      const auto cuu = static_cast<std::size_t>(cu);
      const double wv = g.at(cuu, u);
      if (g2.w[super * g2.k + a] == neg ||
          better(wv, g.orig[cuu * k + u], g2.w[super * g2.k + a], g2.orig[super * g2.k + a])) {
        g2.w[super * g2.k + a] = wv;
        g2.orig[super * g2.k + a] = g.orig[cuu * k + u];
      }
    }
  }

  cle_solve(g2, heads_out);

  // The recursion assigned exactly one dependent inside the contracted
  // component (the candidate deps of the u->super edges); original nodes
  // partition across components, so that dependent identifies the entry label.
  int entered = -1;
  for (std::size_t a = 0; a < keep.size() && entered < 0; ++a) {
    if (entry_label[a] < 0) continue;
    const int dep = g2.orig[a * g2.k + super].second;
    if (heads_out[static_cast<std::size_t>(dep)] != kUnassigned) entered = entry_label[a];
  }
  if (entered < 0) throw ValidationError("cle: contracted cycle was never entered");

  for (int cv : cycle) {
    if (cv == entered) continue;
    const auto v = static_cast<std::size_t>(cv);
    const auto [h0, d0] = g.orig[static_cast<std::size_t>(best[v]) * k + v];
    heads_out[static_cast<std::size_t>(d0)] = h0;
  }
}

}  // namespace

Arborescence max_arborescence(const Tensor& weights, int root) {
  if (weights.rank() != 2 || weights.rows() != weights.cols()) {
    throw ShapeError("weight matrix must be square");
  }
  const std::size_t m = weights.rows();
  if (root < 0 || static_cast<std::size_t>(root) >= m) throw ValidationError("root out of range");

  Arborescence out;
  out.root = root;
  out.heads.assign(m, kUnassigned);
  out.heads[static_cast<std::size_t>(root)] = kRootHead;
  if (m > 1) {
    CleGraph g;
    g.k = m;
    g.root = root;
    g.w = std::vector<double>(m * m, 0.0);
    g.orig.resize(m * m);
    for (std::size_t u = 0; u < m; ++u) {
      for (std::size_t v = 0; v < m; ++v) {
        g.w[u * m + v] = weights.at(u, v);
        g.orig[u * m + v] = {static_cast<int>(u), static_cast<int>(v)};
      }
    }
    cle_solve(g, out.heads);
  }
  out.score = 0.0;
  for (std::size_t v = 0; v < m; ++v) {
    if (out.heads[v] == kRootHead) continue;
    out.score += weights.at(static_cast<std::size_t>(out.heads[v]), v);
  }
  validate_arborescence(out);
  return out;
}

Arborescence cle_extract(const TreeMarginals& marginals) {
  const std::size_t m = marginals.root_p.size();
  if (m == 0) throw ShapeError("cle_extract on zero nodes");
  int root = 0;
  for (std::size_t i = 1; i < m; ++i) {
    if (marginals.root_p[i] > marginals.root_p[static_cast<std::size_t>(root)]) root = static_cast<int>(i);
  }
  Tensor w({m, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      w.at(i, j) = std::log(std::max(marginals.P.at(i, j) + 1e-12, 1e-300));
    }
  }
  return max_arborescence(w, root);
}

std::vector<std::pair<int, std::vector<int>>> enumerate_arborescences(std::size_t m) {
  if (m < 1 || m > 6) throw ValidationError("enumerate_arborescences supports 1 <= m <= 6");
  std::vector<std::pair<int, std::vector<int>>> out;
  const auto reaches_root = [m](const std::vector<int>& heads) {
    for (std::size_t v = 0; v < m; ++v) {
      std::size_t cur = v, steps = 0;
      while (heads[cur] != kRootHead) {
        cur = static_cast<std::size_t>(heads[cur]);
        if (++steps > m) return false;
      }
    }
    return true;
  };
  for (int root = 0; root < static_cast<int>(m); ++root) {
    std::vector<std::size_t> free_nodes;
    for (std::size_t v = 0; v < m; ++v) {
      if (static_cast<int>(v) != root) free_nodes.push_back(v);
    }
    std::vector<int> choice(free_nodes.size(), 0);
    for (;;) {
      std::vector<int> heads(m, kRootHead);
      bool valid_choice = true;
      for (std::size_t i = 0; i < free_nodes.size(); ++i) {
        if (choice[i] == static_cast<int>(free_nodes[i])) {
          valid_choice = false;
          break;
        }
        heads[free_nodes[i]] = choice[i];
      }
      if (valid_choice && reaches_root(heads)) out.emplace_back(root, heads);
      // odometer over head choices
      std::size_t pos = 0;
      while (pos < choice.size()) {
        if (++choice[pos] < static_cast<int>(m)) break;
        choice[pos] = 0;
        ++pos;
      }
      if (pos == choice.size()) break;
    }
  }
  return out;
}

TreeMarginals oracle_marginals(const ScoreSet& scores) {
  const std::size_t m = scores.E.rows();
  if (m < 1 || m > 6) throw ValidationError("oracle_marginals supports 1 <= m <= 6");
  if (scores.r.size() != m) throw ShapeError("root score length does not match edge scores");

  double c = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.E.size(); ++i) c = std::max(c, scores.E[i]);
  for (std::size_t i = 0; i < m; ++i) c = std::max(c, scores.r[i]);

  TreeMarginals out;
  out.P = Tensor({m, m});
  out.root_p = Tensor({m});
  double z = 0.0;
  for (const auto& [root, heads] : enumerate_arborescences(m)) {
    double logw = scores.r[static_cast<std::size_t>(root)] - c;
    for (std::size_t v = 0; v < m; ++v) {
      if (heads[v] == kRootHead) continue;
      logw += scores.E.at(static_cast<std::size_t>(heads[v]), v) - c;
    }
    const double w = std::exp(logw);
    z += w;
    out.root_p[static_cast<std::size_t>(root)] += w;
    for (std::size_t v = 0; v < m; ++v) {
      if (heads[v] == kRootHead) continue;
      out.P.at(static_cast<std::size_t>(heads[v]), v) += w;
    }
  }
  if (z <= 0.0) throw SingularMatrixError("oracle_marginals: total tree weight vanished");
  for (std::size_t i = 0; i < out.P.size(); ++i) out.P[i] /= z;
  for (std::size_t i = 0; i < m; ++i) out.root_p[i] /= z;
  out.log_z = std::log(z) + static_cast<double>(m) * c;
  return out;
}

int hop_distance(const Arborescence& tree, int u, int v) {
  const std::size_t m = tree.size();
  if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= m || static_cast<std::size_t>(v) >= m) {
    throw ValidationError("hop_distance node index out of range");
  }
  if (u == v) return 0;
  std::vector<std::vector<int>> adj(m);
  for (std::size_t w = 0; w < m; ++w) {
    if (tree.heads[w] == kRootHead) continue;
    adj[w].push_back(tree.heads[w]);
    adj[static_cast<std::size_t>(tree.heads[w])].push_back(static_cast<int>(w));
  }
  std::vector<int> dist(m, -1);
  std::deque<int> queue{u};
  dist[static_cast<std::size_t>(u)] = 0;
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    if (cur == v) return dist[static_cast<std::size_t>(cur)];
    for (int nb : adj[static_cast<std::size_t>(cur)]) {
      if (dist[static_cast<std::size_t>(nb)] < 0) {
        dist[static_cast<std::size_t>(nb)] = dist[static_cast<std::size_t>(cur)] + 1;
        queue.push_back(nb);
      }
    }
  }
  throw ValidationError("hop_distance: nodes are disconnected");
}

double DistanceReport::overall_mean(const std::string& source) const {
  auto it = rows.find(source);
  if (it == rows.end()) return 0.0;
  double total = 0.0;
  std::size_t count = 0;
  for (const DistanceRow& row : it->second) {
    total += row.mean_distance * static_cast<double>(row.count);
    count += row.count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

DistanceReport distance_report(const std::vector<Instance>& instances,
                               const std::map<std::string, TreeBank>& banks, const Lexicon& lexicon) {
  DistanceReport report;
  for (const auto& [source, bank] : banks) {
    if (bank.trees.size() != instances.size()) {
      throw ValidationError("tree bank for source \"" + source + "\" is not aligned with instances");
    }
    const int offset = bank.includes_synthetic ? 1 : 0;
    std::map<std::string, std::pair<double, std::size_t>> acc;  // word -> (sum, count)
    std::size_t skipped = 0;
    for (std::size_t idx = 0; idx < instances.size(); ++idx) {
      const Instance& inst = instances[idx];
      if (!bank.trees[idx]) {
        ++skipped;
        continue;
      }
      const Arborescence& tree = *bank.trees[idx];
      for (std::size_t p = 0; p < inst.tokens.size(); ++p) {
        if (p >= inst.aspect_begin && p < inst.aspect_end) continue;  // would be distance 0
        const std::string w = lowercased(inst.tokens[p]);
        if (!lexicon.contains(w)) continue;
        int best = std::numeric_limits<int>::max();
        for (std::size_t q = inst.aspect_begin; q < inst.aspect_end; ++q) {
          best = std::min(best, hop_distance(tree, static_cast<int>(p) + offset,
                                             static_cast<int>(q) + offset));
        }
        auto& [sum, count] = acc[w];
        sum += best;
        count += 1;
      }
    }
    std::vector<DistanceRow> rows;
    for (const auto& [word, sc] : acc) {
      DistanceRow row;
      row.word = word;
      row.word_polarity = lexicon.positive.count(word) ? Polarity::Positive : Polarity::Negative;
      row.mean_distance = sc.first / static_cast<double>(sc.second);
      row.count = sc.second;
      rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const DistanceRow& a, const DistanceRow& b) {
      if (a.word_polarity != b.word_polarity) {
        return static_cast<int>(a.word_polarity) < static_cast<int>(b.word_polarity);
      }
      return a.word < b.word;
    });
    report.rows[source] = std::move(rows);
    report.skipped[source] = skipped;
  }
  return report;
}

RootConsistency root_consistency(const std::vector<Instance>& instances, const TreeBank& bank) {
  if (bank.trees.size() != instances.size()) {
    throw ValidationError("tree bank is not aligned with instances");
  }
  RootConsistency out;
  const int offset = bank.includes_synthetic ? 1 : 0;
  for (std::size_t idx = 0; idx < instances.size(); ++idx) {
    if (!bank.trees[idx]) {
      ++out.skipped;
      continue;
    }
    ++out.total;
    const int root = bank.trees[idx]->root;
    const int token = root - offset;
    if (token < 0) continue;  // synthetic node as root is never an aspect word
    const Instance& inst = instances[idx];
    if (static_cast<std::size_t>(token) >= inst.aspect_begin &&
        static_cast<std::size_t>(token) < inst.aspect_end) {
      ++out.rooted_in_aspect;
    }
  }
  return out;
}

TreeBank parser_bank(const std::vector<Instance>& instances) {
  TreeBank bank;
  bank.includes_synthetic = false;
  bank.trees.reserve(instances.size());
  for (const Instance& inst : instances) {
    if (!inst.parse_heads) {
      bank.trees.emplace_back(std::nullopt);
      continue;
    }
    Arborescence tree;
    tree.heads = *inst.parse_heads;
    tree.root = static_cast<int>(std::find(tree.heads.begin(), tree.heads.end(), kParseRoot) -
                                 tree.heads.begin());
    tree.score = 0.0;
    bank.trees.emplace_back(std::move(tree));
  }
  return bank;
}

std::string dump_tree_block(const Instance& inst, const Arborescence& tree, const Tensor& root_p) {
  if (tree.size() != inst.tokens.size() + 1 || root_p.size() != tree.size()) {
    throw ShapeError("tree dump: tree/instance size mismatch");
  }
  std::string out = "# " + inst.id + "\n";
  char buf[64];
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const std::string token = i == 0 ? EmbeddingTable::kNode0 : inst.tokens[i - 1];
    std::string head;
    if (tree.heads[i] == kRootHead) {
      head = "ROOT";
    } else {
      head = std::to_string(tree.heads[i]);
    }
    std::snprintf(buf, sizeof buf, "%.6f", root_p[i]);
    out += std::to_string(i) + "\t" + token + "\t" + head + "\t" + buf + "\n";
  }
  return out;
}

}  // namespace arbolatent
