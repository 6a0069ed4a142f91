#include "arbolatent/tape.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "arbolatent/error.hpp"
#include "arbolatent/linalg.hpp"

namespace arbolatent {

namespace {

// rank-2 -> (rows, cols); rank-1 -> (n, 1), i.e. a column vector
std::pair<std::size_t, std::size_t> mdims(const Tensor& t) {
  if (t.rank() == 2) return {t.rows(), t.cols()};
  return {t.size(), 1};
}

double elem(const Tensor& t, std::size_t r, std::size_t c, bool trans) {
  const auto [rows, cols] = mdims(t);
  (void)rows;
  return trans ? t[c * cols + r] : t[r * cols + c];
}

// dst (viewed ra x cb) += op(A) * op(B)
void accum_mm(Tensor& dst, const Tensor& a, bool ta, const Tensor& b, bool tb) {
  auto [ra, ca] = mdims(a);
  if (ta) std::swap(ra, ca);
  auto [rb, cb] = mdims(b);
  if (tb) std::swap(rb, cb);
  for (std::size_t i = 0; i < ra; ++i) {
    for (std::size_t j = 0; j < cb; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < ca; ++k) s += elem(a, i, k, ta) * elem(b, k, j, tb);
      dst[i * cb + j] += s;
    }
  }
}

void ensure(std::vector<Tensor>& grads, std::size_t id, const Tensor& like) {
  if (grads[id].size() == 0) grads[id] = Tensor(like.shape());
}

}  // namespace

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Param: return "param";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::AddScalar: return "add_scalar";
    case Op::Scale: return "scale";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sigmoid: return "sigmoid";
    case Op::Relu: return "relu";
    case Op::Reciprocal: return "reciprocal";
    case Op::Clamp: return "clamp";
    case Op::SoftmaxRows: return "softmax_rows";
    case Op::Sum: return "sum";
    case Op::RowSum: return "row_sum";
    case Op::ColSum: return "col_sum";
    case Op::ConcatCols: return "concat_cols";
    case Op::StackRows: return "stack_rows";
    case Op::SliceRows: return "slice_rows";
    case Op::Reshape: return "reshape";
    case Op::Inverse: return "inverse";
    case Op::LogDet: return "logdet";
    case Op::MaskedFill: return "masked_fill";
    case Op::GatherRows: return "gather_rows";
    case Op::SetRow: return "set_row";
    case Op::DiagPart: return "diag_part";
    case Op::DiagEmbed: return "diag_embed";
    case Op::BroadcastRow: return "broadcast_row";
    case Op::ScaleRows: return "scale_rows";
    case Op::AddRowVec: return "add_rowvec";
    case Op::Column: return "column";
  }
  return "?";
}

Var Tape::push(Node n) {
  if (!n.value.all_finite()) {
    std::string msg = std::string("non-finite values produced by ") + op_name(n.op);
    if (!context_.empty()) msg += " [" + context_ + "]";
    throw NumericError(msg);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::value(Var v) const { return nodes_.at(v.id).value; }

double Tape::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) throw ShapeError("scalar() on tensor of shape " + t.shape_string());
  return t[0];
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(const std::string& name) {
  if (!store_) throw ValidationError("tape has no bound ParamStore, cannot record param " + name);
  Node n;
  n.op = Op::Param;
  n.value = store_->value(name);
  n.param = name;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || B.rank() < 1 || B.rank() > 2) {
    throw ShapeError("matmul expects {m,k}x{k,n} or {m,k}x{k}");
  }
  const auto [ra, ca] = mdims(A);
  const auto [rb, cb] = mdims(B);
  if (ca != rb) {
    throw ShapeError("matmul inner extents differ: " + A.shape_string() + " vs " + B.shape_string());
  }
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a.id, b.id};
  n.value = B.rank() == 1 ? Tensor({ra}) : Tensor({ra, cb});
  accum_mm(n.value, A, false, B, false);
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  const Tensor& A = value(a);
  if (A.rank() != 2) throw ShapeError("transpose expects a matrix");
  Node n;
  n.op = Op::Transpose;
  n.inputs = {a.id};
  n.value = Tensor({A.cols(), A.rows()});
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) n.value.at(j, i) = A.at(i, j);
  }
  return push(std::move(n));
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + " shape mismatch: " + a.shape_string() + " vs " + b.shape_string());
  }
}
}  // namespace

Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_same_shape(A, B, "add");
  Node n;
  n.op = Op::Add;
  n.inputs = {a.id, b.id};
  n.value = A;
  for (std::size_t i = 0; i < B.size(); ++i) n.value[i] += B[i];
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_same_shape(A, B, "sub");
  Node n;
  n.op = Op::Sub;
  n.inputs = {a.id, b.id};
  n.value = A;
  for (std::size_t i = 0; i < B.size(); ++i) n.value[i] -= B[i];
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_same_shape(A, B, "mul");
  Node n;
  n.op = Op::Mul;
  n.inputs = {a.id, b.id};
  n.value = A;
  for (std::size_t i = 0; i < B.size(); ++i) n.value[i] *= B[i];
  return push(std::move(n));
}

Var Tape::add_scalar(Var a, double c) {
  Node n;
  n.op = Op::AddScalar;
  n.inputs = {a.id};
  n.s0 = c;
  n.value = value(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += c;
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.inputs = {a.id};
  n.s0 = c;
  n.value = value(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= c;
  return push(std::move(n));
}

namespace {
template <typename F>
Tensor map_tensor(const Tensor& a, F f) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(out[i]);
  return out;
}
}  // namespace

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.inputs = {a.id};
  n.value = map_tensor(value(a), [](double x) { return std::tanh(x); });
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  Node n;
  n.op = Op::Exp;
  n.inputs = {a.id};
  n.value = map_tensor(value(a), [](double x) { return std::exp(x); });
  return push(std::move(n));
}

Var Tape::log(Var a) {
  Node n;
  n.op = Op::Log;
  n.inputs = {a.id};
  n.value = map_tensor(value(a), [](double x) { return std::log(x); });
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.inputs = {a.id};
  n.value = map_tensor(value(a), [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::Relu;
  n.inputs = {a.id};
  n.value = map_tensor(value(a), [](double x) { return x > 0.0 ? x : 0.0; });
  return push(std::move(n));
}

Var Tape::reciprocal(Var a) {
  Node n;
  n.op = Op::Reciprocal;
  n.inputs = {a.id};
  n.value = map_tensor(value(a), [](double x) { return 1.0 / x; });
  return push(std::move(n));
}

Var Tape::clamp(Var a, double lo, double hi) {
  Node n;
  n.op = Op::Clamp;
  n.inputs = {a.id};
  n.s0 = lo;
  n.s1 = hi;
  n.value = map_tensor(value(a), [=](double x) { return std::min(std::max(x, lo), hi); });
  return push(std::move(n));
}

Var Tape::softmax_rows(Var a) {
  const Tensor& A = value(a);
  const std::size_t rows = A.rank() == 2 ? A.rows() : 1;
  const std::size_t cols = A.rank() == 2 ? A.cols() : A.size();
  Node n;
  n.op = Op::SoftmaxRows;
  n.inputs = {a.id};
  n.value = A;
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, A[i * cols + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = std::exp(A[i * cols + j] - mx);
      n.value[i * cols + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < cols; ++j) n.value[i * cols + j] /= z;
  }
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const Tensor& A = value(a);
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
  Node n;
  n.op = Op::Sum;
  n.inputs = {a.id};
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Var Tape::row_sum(Var a) {
  const Tensor& A = value(a);
  if (A.rank() != 2) throw ShapeError("row_sum expects a matrix");
  Node n;
  n.op = Op::RowSum;
  n.inputs = {a.id};
  n.value = Tensor({A.rows()});
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < A.cols(); ++j) s += A.at(i, j);
    n.value[i] = s;
  }
  return push(std::move(n));
}

Var Tape::col_sum(Var a) {
  const Tensor& A = value(a);
  if (A.rank() != 2) throw ShapeError("col_sum expects a matrix");
  Node n;
  n.op = Op::ColSum;
  n.inputs = {a.id};
  n.value = Tensor({A.cols()});
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) n.value[j] += A.at(i, j);
  }
  return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols of nothing");
  const std::size_t rows = value(xs[0]).rows();
  std::size_t cols = 0;
  for (Var x : xs) {
    const Tensor& t = value(x);
    if (t.rank() != 2 || t.rows() != rows) throw ShapeError("concat_cols row mismatch");
    cols += t.cols();
  }
  Node n;
  n.op = Op::ConcatCols;
  n.value = Tensor({rows, cols});
  for (Var x : xs) n.inputs.push_back(x.id);
  std::size_t off = 0;
  for (Var x : xs) {
    const Tensor& t = value(x);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < t.cols(); ++j) n.value.at(i, off + j) = t.at(i, j);
    }
    off += t.cols();
  }
  return push(std::move(n));
}

Var Tape::stack_rows(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("stack_rows of nothing");
  const std::size_t cols = value(xs[0]).size();
  Node n;
  n.op = Op::StackRows;
  n.value = Tensor({xs.size(), cols});
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor& t = value(xs[i]);
    if (t.rank() != 1 || t.size() != cols) throw ShapeError("stack_rows expects equal-length vectors");
    n.inputs.push_back(xs[i].id);
    for (std::size_t j = 0; j < cols; ++j) n.value.at(i, j) = t[j];
  }
  return push(std::move(n));
}

Var Tape::slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& A = value(a);
  if (A.rank() != 2 || begin >= end || end > A.rows()) {
    throw ShapeError("slice_rows bounds invalid for " + A.shape_string());
  }
  Node n;
  n.op = Op::SliceRows;
  n.inputs = {a.id};
  n.idx = {static_cast<std::int64_t>(begin), static_cast<std::int64_t>(end)};
  n.value = Tensor({end - begin, A.cols()});
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) n.value.at(i - begin, j) = A.at(i, j);
  }
  return push(std::move(n));
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  const Tensor& A = value(a);
  Tensor out(std::move(shape));
  if (out.size() != A.size()) throw ShapeError("reshape size mismatch");
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i];
  Node n;
  n.op = Op::Reshape;
  n.inputs = {a.id};
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::inverse(Var a) {
  const Tensor& A = value(a);
  LuFactor f = lu_factor(A);
  Node n;
  n.op = Op::Inverse;
  n.inputs = {a.id};
  n.value = lu_inverse(f, context_);
  return push(std::move(n));
}

Var Tape::logdet(Var a) {
  const Tensor& A = value(a);
  LuFactor f = lu_factor(A);
  Node n;
  n.op = Op::LogDet;
  n.inputs = {a.id};
  n.value = Tensor::scalar(lu_logdet(f, context_));
  n.aux = lu_inverse(f, context_);
  return push(std::move(n));
}

Var Tape::masked_fill(Var a, Mask mask, double fill) {
  const Tensor& A = value(a);
  if (!mask || mask->size() != A.size()) throw ShapeError("masked_fill mask size mismatch");
  Node n;
  n.op = Op::MaskedFill;
  n.inputs = {a.id};
  n.s0 = fill;
  n.mask = std::move(mask);
  n.value = A;
  for (std::size_t i = 0; i < A.size(); ++i) {
    if ((*n.mask)[i]) n.value[i] = fill;
  }
  return push(std::move(n));
}

Var Tape::gather_rows(Var table, std::vector<std::int64_t> ids) {
  const Tensor& T = value(table);
  if (T.rank() != 2) throw ShapeError("gather_rows expects a matrix table");
  Node n;
  n.op = Op::GatherRows;
  n.inputs = {table.id};
  n.value = Tensor({ids.size(), T.cols()});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::int64_t id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= T.rows()) {
      throw ShapeError("gather_rows id out of range");
    }
    for (std::size_t j = 0; j < T.cols(); ++j) n.value.at(i, j) = T.at(static_cast<std::size_t>(id), j);
  }
  n.idx = std::move(ids);
  return push(std::move(n));
}

Var Tape::set_row(Var m, std::size_t row, Var v) {
  const Tensor& M = value(m);
  const Tensor& V = value(v);
  if (M.rank() != 2 || row >= M.rows() || V.size() != M.cols()) {
    throw ShapeError("set_row shape mismatch");
  }
  Node n;
  n.op = Op::SetRow;
  n.inputs = {m.id, v.id};
  n.idx = {static_cast<std::int64_t>(row)};
  n.value = M;
  for (std::size_t j = 0; j < M.cols(); ++j) n.value.at(row, j) = V[j];
  return push(std::move(n));
}

Var Tape::diag_part(Var a) {
  const Tensor& A = value(a);
  if (A.rank() != 2 || A.rows() != A.cols()) throw ShapeError("diag_part expects a square matrix");
  Node n;
  n.op = Op::DiagPart;
  n.inputs = {a.id};
  n.value = Tensor({A.rows()});
  for (std::size_t i = 0; i < A.rows(); ++i) n.value[i] = A.at(i, i);
  return push(std::move(n));
}

Var Tape::diag_embed(Var v) {
  const Tensor& V = value(v);
  if (V.rank() != 1) throw ShapeError("diag_embed expects a vector");
  Node n;
  n.op = Op::DiagEmbed;
  n.inputs = {v.id};
  n.value = Tensor({V.size(), V.size()});
  for (std::size_t i = 0; i < V.size(); ++i) n.value.at(i, i) = V[i];
  return push(std::move(n));
}

Var Tape::broadcast_row(Var v, std::size_t rows) {
  const Tensor& V = value(v);
  if (V.rank() != 1) throw ShapeError("broadcast_row expects a vector");
  Node n;
  n.op = Op::BroadcastRow;
  n.inputs = {v.id};
  n.value = Tensor({rows, V.size()});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < V.size(); ++j) n.value.at(i, j) = V[j];
  }
  return push(std::move(n));
}

Var Tape::scale_rows(Var m, Var v) {
  const Tensor& M = value(m);
  const Tensor& V = value(v);
  if (M.rank() != 2 || V.rank() != 1 || V.size() != M.rows()) throw ShapeError("scale_rows shape mismatch");
  Node n;
  n.op = Op::ScaleRows;
  n.inputs = {m.id, v.id};
  n.value = M;
  for (std::size_t i = 0; i < M.rows(); ++i) {
    for (std::size_t j = 0; j < M.cols(); ++j) n.value.at(i, j) *= V[i];
  }
  return push(std::move(n));
}

Var Tape::add_rowvec(Var m, Var v) {
  const Tensor& M = value(m);
  const Tensor& V = value(v);
  if (M.rank() != 2 || V.rank() != 1 || V.size() != M.cols()) throw ShapeError("add_rowvec shape mismatch");
  Node n;
  n.op = Op::AddRowVec;
  n.inputs = {m.id, v.id};
  n.value = M;
  for (std::size_t i = 0; i < M.rows(); ++i) {
    for (std::size_t j = 0; j < M.cols(); ++j) n.value.at(i, j) += V[j];
  }
  return push(std::move(n));
}

Var Tape::column(Var m, std::size_t col) {
  const Tensor& M = value(m);
  if (M.rank() != 2 || col >= M.cols()) throw ShapeError("column index out of range");
  Node n;
  n.op = Op::Column;
  n.inputs = {m.id};
  n.idx = {static_cast<std::int64_t>(col)};
  n.value = Tensor({M.rows()});
  for (std::size_t i = 0; i < M.rows(); ++i) n.value[i] = M.at(i, col);
  return push(std::move(n));
}

void Tape::run_backward(Var loss, std::vector<Tensor>& grads) {
  if (value(loss).size() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + value(loss).shape_string());
  }
  grads.assign(nodes_.size(), Tensor());
  grads[loss.id] = Tensor::scalar(1.0);

  for (std::size_t ii = loss.id + 1; ii-- > 0;) {
    Node& n = nodes_[ii];
    Tensor& g = grads[ii];
    if (g.size() == 0) continue;  // not reachable from the loss
    if (!g.all_finite()) {
      std::string msg = std::string("NaN encountered during gradient accumulation at ") + op_name(n.op);
      if (!context_.empty()) msg += " [" + context_ + "]";
      throw NumericError(msg);
    }
    switch (n.op) {
      case Op::Constant:
      case Op::Param:
        break;
      case Op::MatMul: {
        const Tensor& A = in(n, 0);
        const Tensor& B = in(n, 1);
        ensure(grads, n.inputs[0], A);
        ensure(grads, n.inputs[1], B);
        accum_mm(grads[n.inputs[0]], g, false, B, true);   // dA += G B^T
        accum_mm(grads[n.inputs[1]], A, true, g, false);   // dB += A^T G
        break;
      }
      case Op::Transpose: {
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < A.rows(); ++i) {
          for (std::size_t j = 0; j < A.cols(); ++j) d.at(i, j) += g.at(j, i);
        }
        break;
      }
      case Op::Add: {
        for (int k = 0; k < 2; ++k) {
          ensure(grads, n.inputs[k], in(n, k));
          Tensor& d = grads[n.inputs[k]];
          for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        }
        break;
      }
      case Op::Sub: {
        ensure(grads, n.inputs[0], in(n, 0));
        ensure(grads, n.inputs[1], in(n, 1));
        Tensor& da = grads[n.inputs[0]];
        Tensor& db = grads[n.inputs[1]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          da[i] += g[i];
          db[i] -= g[i];
        }
        break;
      }
      case Op::Mul: {
        const Tensor& A = in(n, 0);
        const Tensor& B = in(n, 1);
        ensure(grads, n.inputs[0], A);
        ensure(grads, n.inputs[1], B);
        Tensor& da = grads[n.inputs[0]];
        Tensor& db = grads[n.inputs[1]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          da[i] += g[i] * B[i];
          db[i] += g[i] * A[i];
        }
        break;
      }
      case Op::AddScalar: {
        ensure(grads, n.inputs[0], in(n, 0));
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        break;
      }
      case Op::Scale: {
        ensure(grads, n.inputs[0], in(n, 0));
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.s0;
        break;
      }
      case Op::Tanh: {
        ensure(grads, n.inputs[0], in(n, 0));
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::Exp: {
        ensure(grads, n.inputs[0], in(n, 0));
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.value[i];
        break;
      }
      case Op::Log: {
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] / A[i];
        break;
      }
      case Op::Sigmoid: {
        ensure(grads, n.inputs[0], in(n, 0));
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
        break;
      }
      case Op::Relu: {
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += A[i] > 0.0 ? g[i] : 0.0;
        break;
      }
      case Op::Reciprocal: {
        ensure(grads, n.inputs[0], in(n, 0));
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i] * n.value[i] * n.value[i];
        break;
      }
      case Op::Clamp: {
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (A[i] > n.s0 && A[i] < n.s1) d[i] += g[i];
        }
        break;
      }
      case Op::SoftmaxRows: {
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        const std::size_t rows = A.rank() == 2 ? A.rows() : 1;
        const std::size_t cols = A.rank() == 2 ? A.cols() : A.size();
        for (std::size_t i = 0; i < rows; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) dot += g[i * cols + j] * n.value[i * cols + j];
          for (std::size_t j = 0; j < cols; ++j) {
            d[i * cols + j] += n.value[i * cols + j] * (g[i * cols + j] - dot);
          }
        }
        break;
      }
      case Op::Sum: {
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0];
        break;
      }
      case Op::RowSum: {
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < A.rows(); ++i) {
          for (std::size_t j = 0; j < A.cols(); ++j) d.at(i, j) += g[i];
        }
        break;
      }
      case Op::ColSum: {
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < A.rows(); ++i) {
          for (std::size_t j = 0; j < A.cols(); ++j) d.at(i, j) += g[j];
        }
        break;
      }
      case Op::ConcatCols: {
        std::size_t off = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const Tensor& A = in(n, k);
          ensure(grads, n.inputs[k], A);
          Tensor& d = grads[n.inputs[k]];
          for (std::size_t i = 0; i < A.rows(); ++i) {
            for (std::size_t j = 0; j < A.cols(); ++j) d.at(i, j) += g.at(i, off + j);
          }
          off += A.cols();
        }
        break;
      }
      case Op::StackRows: {
        const std::size_t cols = n.value.cols();
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          ensure(grads, n.inputs[k], in(n, k));
          Tensor& d = grads[n.inputs[k]];
          for (std::size_t j = 0; j < cols; ++j) d[j] += g.at(k, j);
        }
        break;
      }
      case Op::SliceRows: {
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        const auto begin = static_cast<std::size_t>(n.idx[0]);
        for (std::size_t i = 0; i < n.value.rows(); ++i) {
          for (std::size_t j = 0; j < n.value.cols(); ++j) d.at(begin + i, j) += g.at(i, j);
        }
        break;
      }
      case Op::Reshape: {
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
        break;
      }
      case Op::Inverse: {
        // B = A^{-1}:  dA += -B^T G B^T
        const Tensor& B = n.value;
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor tmp({B.rows(), B.cols()});
        accum_mm(tmp, B, true, g, false);
        Tensor tmp2({B.rows(), B.cols()});
        accum_mm(tmp2, tmp, false, B, true);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= tmp2[i];
        break;
      }
      case Op::LogDet: {
        // d log|det A| / dA = A^{-T}
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < A.rows(); ++i) {
          for (std::size_t j = 0; j < A.cols(); ++j) d.at(i, j) += g[0] * n.aux.at(j, i);
        }
        break;
      }
      case Op::MaskedFill: {
        ensure(grads, n.inputs[0], in(n, 0));
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (!(*n.mask)[i]) d[i] += g[i];
        }
        break;
      }
      case Op::GatherRows: {
        const Tensor& T = in(n, 0);
        ensure(grads, n.inputs[0], T);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < n.idx.size(); ++i) {
          const auto row = static_cast<std::size_t>(n.idx[i]);
          for (std::size_t j = 0; j < T.cols(); ++j) d.at(row, j) += g.at(i, j);
        }
        break;
      }
      case Op::SetRow: {
        const Tensor& M = in(n, 0);
        const Tensor& V = in(n, 1);
        ensure(grads, n.inputs[0], M);
        ensure(grads, n.inputs[1], V);
        Tensor& dm = grads[n.inputs[0]];
        Tensor& dv = grads[n.inputs[1]];
        const auto row = static_cast<std::size_t>(n.idx[0]);
        for (std::size_t i = 0; i < M.rows(); ++i) {
          for (std::size_t j = 0; j < M.cols(); ++j) {
            if (i == row) continue;
            dm.at(i, j) += g.at(i, j);
          }
        }
        for (std::size_t j = 0; j < M.cols(); ++j) dv[j] += g.at(row, j);
        break;
      }
      case Op::DiagPart: {
        const Tensor& A = in(n, 0);
        ensure(grads, n.inputs[0], A);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < A.rows(); ++i) d.at(i, i) += g[i];
        break;
      }
      case Op::DiagEmbed: {
        const Tensor& V = in(n, 0);
        ensure(grads, n.inputs[0], V);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < V.size(); ++i) d[i] += g.at(i, i);
        break;
      }
      case Op::BroadcastRow: {
        const Tensor& V = in(n, 0);
        ensure(grads, n.inputs[0], V);
        Tensor& d = grads[n.inputs[0]];
        for (std::size_t i = 0; i < n.value.rows(); ++i) {
          for (std::size_t j = 0; j < V.size(); ++j) d[j] += g.at(i, j);
        }
        break;
      }
      case Op::ScaleRows: {
        const Tensor& M = in(n, 0);
        const Tensor& V = in(n, 1);
        ensure(grads, n.inputs[0], M);
        ensure(grads, n.inputs[1], V);
        Tensor& dm = grads[n.inputs[0]];
        Tensor& dv = grads[n.inputs[1]];
        for (std::size_t i = 0; i < M.rows(); ++i) {
          for (std::size_t j = 0; j < M.cols(); ++j) {
            dm.at(i, j) += g.at(i, j) * V[i];
            dv[i] += g.at(i, j) * M.at(i, j);
          }
        }
        break;
      }
      case Op::AddRowVec: {
        const Tensor& M = in(n, 0);
        const Tensor& V = in(n, 1);
        ensure(grads, n.inputs[0], M);
        ensure(grads, n.inputs[1], V);
        Tensor& dm = grads[n.inputs[0]];
        Tensor& dv = grads[n.inputs[1]];
        for (std::size_t i = 0; i < M.rows(); ++i) {
          for (std::size_t j = 0; j < M.cols(); ++j) {
            dm.at(i, j) += g.at(i, j);
            dv[j] += g.at(i, j);
          }
        }
        break;
      }
      case Op::Column: {
        const Tensor& M = in(n, 0);
        ensure(grads, n.inputs[0], M);
        Tensor& d = grads[n.inputs[0]];
        const auto col = static_cast<std::size_t>(n.idx[0]);
        for (std::size_t i = 0; i < M.rows(); ++i) d.at(i, col) += g[i];
        break;
      }
    }
  }
}

void Tape::backward(Var loss) {
  if (!store_) throw ValidationError("backward without a bound ParamStore");
  std::vector<Tensor> grads;
  run_backward(loss, grads);
  for (std::size_t i = 0; i <= loss.id; ++i) {
    const Node& n = nodes_[i];
    if (n.op != Op::Param || grads[i].size() == 0) continue;
    Tensor& dst = store_->grad(n.param);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += grads[i][k];
  }
}

GradMap Tape::backward_collect(Var loss) {
  std::vector<Tensor> grads;
  run_backward(loss, grads);
  GradMap out;
  for (std::size_t i = 0; i <= loss.id; ++i) {
    const Node& n = nodes_[i];
    if (n.op != Op::Param || grads[i].size() == 0) continue;
    Tensor& dst = out.try_emplace(n.param, Tensor(n.value.shape())).first->second;
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += grads[i][k];
  }
  return out;
}

}  // namespace arbolatent
