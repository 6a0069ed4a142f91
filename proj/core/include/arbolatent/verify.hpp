#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arbolatent/data.hpp"
#include "arbolatent/tree_inducer.hpp"

namespace arbolatent {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;  // worst error or the failing case
};

ScoreSet random_score_set(std::size_t m, std::uint64_t seed, double lo = -2.0, double hi = 2.0);

// Marginal inference vs. the exhaustive-enumeration oracle, m in 2..max_m.
PropertyResult check_oracle_equivalence(std::size_t max_m, std::size_t sets_per_m, double tol,
                                        std::uint64_t seed);

// sum_i root_p = 1 and per dependent j: sum_i P_ij + root_p_j = 1.
PropertyResult check_normalization(std::size_t cases, std::size_t max_m, double tol,
                                   std::uint64_t seed);

// A shared constant added to every score leaves the marginals unchanged.
PropertyResult check_shift_invariance(std::size_t cases, double tol, std::uint64_t seed);

// Decoded arborescence score equals the exhaustive maximum for every root.
PropertyResult check_cle_optimality(std::size_t cases_per_m, std::size_t max_m, std::uint64_t seed);

// Decoded structure satisfies the arborescence invariants under fuzzing.
PropertyResult check_cle_fuzz(std::size_t cases, std::size_t max_m, std::uint64_t seed);

// Full combined loss against central finite differences on small random
// instances (step 1e-5).
PropertyResult check_grad_full_loss(std::size_t instance_count, double tol, std::uint64_t seed);

// The cmd-verify suite; max_n caps the oracle-equivalence node count.
std::vector<PropertyResult> run_verification(std::size_t max_n, std::uint64_t seed);

// Small random instances plus a matching embedding table (shared fixture for
// gradient checks).
struct Fixture {
  std::vector<Instance> instances;
  EmbeddingTable table;
};
Fixture make_fixture(std::size_t instance_count, std::size_t min_tokens, std::size_t max_tokens,
                     std::size_t dim, std::uint64_t seed);

}  // namespace arbolatent
