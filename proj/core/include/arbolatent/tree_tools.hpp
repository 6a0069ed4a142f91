#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arbolatent/data.hpp"
#include "arbolatent/tree_inducer.hpp"

namespace arbolatent {

constexpr int kRootHead = -1;

// A decoded discrete tree: heads[v] is the head of v, kRootHead at the root.
struct Arborescence {
  std::vector<int> heads;
  int root = 0;
  double score = 0.0;  // sum of chosen log-weights

  std::size_t size() const { return heads.size(); }
};

void validate_arborescence(const Arborescence& tree);  // throws ValidationError

// Maximum spanning arborescence via Chu-Liu-Edmonds contraction, rooted at
// argmax root marginal (ties: lowest index). Edge weights are
// log(P[i][j] + 1e-12); ties inside the contraction prefer the lowest
// (head, dependent) pair.
Arborescence cle_extract(const TreeMarginals& marginals);

// Maximum spanning arborescence with a fixed root over explicit weights
// (w[i][j] = weight of edge i->j).
Arborescence max_arborescence(const Tensor& weights, int root);

// Every single-root spanning arborescence on m labeled nodes, m <= 6.
// Exactly m^(m-1) trees, each as (root, heads).
std::vector<std::pair<int, std::vector<int>>> enumerate_arborescences(std::size_t m);

// Brute-force marginals by exhaustive enumeration (m <= 6): the independent
// oracle for mtt_marginals. Tree weight = exp(r_root) * prod exp(E_edges).
TreeMarginals oracle_marginals(const ScoreSet& scores);

// Shortest-path length between u and v in the undirected view of the tree.
int hop_distance(const Arborescence& tree, int u, int v);

// Trees for one source, aligned with an instance list. includes_synthetic is
// true for model trees (node 0 is the sentence node; token i is node i+1) and
// false for external parse trees (token i is node i).
struct TreeBank {
  bool includes_synthetic = false;
  std::vector<std::optional<Arborescence>> trees;
};

struct DistanceRow {
  std::string word;
  Polarity word_polarity = Polarity::Neutral;
  double mean_distance = 0.0;
  std::size_t count = 0;
};

struct DistanceReport {
  // source name -> per-opinion-word rows, sorted by (polarity, word)
  std::map<std::string, std::vector<DistanceRow>> rows;
  std::map<std::string, std::size_t> skipped;  // instances without a tree

  // occurrence-weighted mean over all rows of a source
  double overall_mean(const std::string& source) const;
};

// For each lexicon word occurrence, distance = min over aspect tokens of
// hop_distance(opinion token, aspect token); occurrences inside the aspect
// span are skipped. Means are per word per source, over occurrences.
DistanceReport distance_report(const std::vector<Instance>& instances,
                               const std::map<std::string, TreeBank>& banks, const Lexicon& lexicon);

struct RootConsistency {
  std::size_t rooted_in_aspect = 0;
  std::size_t total = 0;
  std::size_t skipped = 0;

  double percent() const {
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(rooted_in_aspect) / static_cast<double>(total);
  }
};

// Counts instances whose decoded root lies anywhere in the aspect span.
RootConsistency root_consistency(const std::vector<Instance>& instances, const TreeBank& bank);

// External parse heads as a TreeBank (instances without parse_heads yield
// empty slots).
TreeBank parser_bank(const std::vector<Instance>& instances);

// CoNLL-like dump: one block per instance, lines
// "index<TAB>token<TAB>head<TAB>root_prob"; the root line prints ROOT.
std::string dump_tree_block(const Instance& inst, const Arborescence& tree, const Tensor& root_p);

}  // namespace arbolatent
