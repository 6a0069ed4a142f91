#include "arbolatent/linalg.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "arbolatent/error.hpp"

namespace arbolatent {

namespace {

constexpr double kSingularRelTol = 1e-12;

[[noreturn]] void throw_singular(const LuFactor& f, const std::string& context) {
  char detail[160];
  std::snprintf(detail, sizeof detail,
                " (log|det| %.3f, n %zu, scale %.3e, threshold |det| < 1e-12 * scale)", f.log_abs_det,
                f.perm.size(), f.scale);
  std::string msg = "singular matrix";
  msg += detail;
  if (!context.empty()) msg += " [" + context + "]";
  throw SingularMatrixError(msg);
}

}  // namespace

bool LuFactor::singular() const {
  if (det_sign == 0) return true;
  if (scale <= 0.0) return true;
  // |det| < tol * scale, in log space
  return log_abs_det < std::log(scale) + std::log(kSingularRelTol);
}

LuFactor lu_factor(const Tensor& a) {
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw ShapeError("lu_factor expects a square matrix, got " + a.shape_string());
  }
  const std::size_t n = a.rows();
  LuFactor f;
  f.lu = a;
  f.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = static_cast<int>(i);
  f.scale = a.max_abs();
  f.det_sign = 1;
  f.log_abs_det = 0.0;

  Tensor& m = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(m.at(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(m.at(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m.at(piv, j), m.at(k, j));
      std::swap(f.perm[piv], f.perm[k]);
      f.det_sign = -f.det_sign;
    }
    const double pivot = m.at(k, k);
    if (pivot == 0.0) {
      f.det_sign = 0;
      f.log_abs_det = -std::numeric_limits<double>::infinity();
      return f;
    }
    f.log_abs_det += std::log(std::abs(pivot));
    if (pivot < 0.0) f.det_sign = -f.det_sign;
    for (std::size_t i = k + 1; i < n; ++i) {
      const double factor = m.at(i, k) / pivot;
      m.at(i, k) = factor;
      for (std::size_t j = k + 1; j < n; ++j) m.at(i, j) -= factor * m.at(k, j);
    }
  }
  return f;
}

Tensor lu_inverse(const LuFactor& f, const std::string& context) {
  if (f.singular()) throw_singular(f, context);
  const std::size_t n = f.perm.size();
  const Tensor& m = f.lu;
  Tensor inv({n, n});
  std::vector<double> col(n), y(n);
  for (std::size_t c = 0; c < n; ++c) {
    // solve A x = e_c given P A = L U
    for (std::size_t i = 0; i < n; ++i) col[i] = (static_cast<std::size_t>(f.perm[i]) == c) ? 1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = col[i];
      for (std::size_t j = 0; j < i; ++j) s -= m.at(i, j) * y[j];
      y[i] = s;
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t j = ii + 1; j < n; ++j) s -= m.at(ii, j) * inv.at(j, c);
      inv.at(ii, c) = s / m.at(ii, ii);
    }
  }
  return inv;
}

double lu_logdet(const LuFactor& f, const std::string& context) {
  if (f.singular()) throw_singular(f, context);
  return f.log_abs_det;
}

}  // namespace arbolatent
