#pragma once

#include <string>
#include <vector>

#include "arbolatent/tensor.hpp"

namespace arbolatent {

// LU factorization with partial pivoting. One factorization serves both the
// inverse and the (log-)determinant.
struct LuFactor {
  Tensor lu;              // packed L (unit diagonal) and U
  std::vector<int> perm;  // row permutation applied to the input
  double log_abs_det = 0.0;
  int det_sign = 0;       // 0 when a pivot is exactly zero
  double scale = 0.0;     // max |a_ij| of the input, for the relative test

  // |det| < 1e-12 * scale^n, i.e. singular relative to the matrix magnitude.
  bool singular() const;
};

LuFactor lu_factor(const Tensor& a);

// Both throw SingularMatrixError (message includes `context` when non-empty).
Tensor lu_inverse(const LuFactor& f, const std::string& context = "");
double lu_logdet(const LuFactor& f, const std::string& context = "");

inline Tensor inverse(const Tensor& a, const std::string& context = "") {
  return lu_inverse(lu_factor(a), context);
}

// log|det A|.
inline double logdet(const Tensor& a, const std::string& context = "") {
  return lu_logdet(lu_factor(a), context);
}

}  // namespace arbolatent
