#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "arbolatent/param_store.hpp"
#include "arbolatent/tensor.hpp"

namespace arbolatent {

// Handle to a node on a Tape.
struct Var {
  std::uint32_t id = 0;
};

using Mask = std::shared_ptr<const std::vector<std::uint8_t>>;
using GradMap = std::map<std::string, Tensor>;

// Reverse-mode tape over dense tensors. Forward values are computed eagerly at
// record time; node ids are topologically ordered by construction, so backward
// is a single reverse sweep. Every primitive checks its output for NaN/Inf.
//
// One Tape is single-threaded. Independent tapes over a shared read-only
// ParamStore may run in parallel; use backward_collect() and reduce the
// per-instance GradMaps in index order for deterministic aggregation.
class Tape {
 public:
  explicit Tape(ParamStore* store = nullptr) : store_(store) {}

  // Label added to numeric error messages (e.g. the instance id).
  void set_context(std::string label) { context_ = std::move(label); }
  const std::string& context() const { return context_; }

  Var constant(Tensor value);
  Var param(const std::string& name);

  Var matmul(Var a, Var b);  // {m,k}x{k,n}->{m,n}; rank-1 rhs {k}->{m}
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_scalar(Var a, double c);
  Var scale(Var a, double c);
  Var tanh(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var reciprocal(Var a);
  Var clamp(Var a, double lo, double hi);
  Var softmax_rows(Var a);  // rank-1 treated as one row
  Var sum(Var a);           // -> scalar {1}
  Var row_sum(Var a);       // {r,c} -> {r}
  Var col_sum(Var a);       // {r,c} -> {c}
  Var concat_cols(const std::vector<Var>& xs);
  Var stack_rows(const std::vector<Var>& xs);  // k vectors {c} -> {k,c}
  Var slice_rows(Var a, std::size_t begin, std::size_t end);
  Var reshape(Var a, std::vector<std::size_t> shape);
  Var inverse(Var a);
  Var logdet(Var a);  // log|det|, scalar {1}
  Var masked_fill(Var a, Mask mask, double value);
  Var gather_rows(Var table, std::vector<std::int64_t> ids);
  Var set_row(Var m, std::size_t row, Var v);
  Var diag_part(Var a);
  Var diag_embed(Var v);
  Var broadcast_row(Var v, std::size_t rows);
  Var scale_rows(Var m, Var v);   // row i scaled by v[i]
  Var add_rowvec(Var m, Var v);   // v broadcast over rows
  Var column(Var m, std::size_t col);

  const Tensor& value(Var v) const;
  double scalar(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Accumulates gradients into the bound ParamStore.
  void backward(Var loss);
  // Gradients returned per call; the store is left untouched.
  GradMap backward_collect(Var loss);

 private:
  enum class Op : std::uint8_t {
    Constant,
    Param,
    MatMul,
    Transpose,
    Add,
    Sub,
    Mul,
    AddScalar,
    Scale,
    Tanh,
    Exp,
    Log,
    Sigmoid,
    Relu,
    Reciprocal,
    Clamp,
    SoftmaxRows,
    Sum,
    RowSum,
    ColSum,
    ConcatCols,
    StackRows,
    SliceRows,
    Reshape,
    Inverse,
    LogDet,
    MaskedFill,
    GatherRows,
    SetRow,
    DiagPart,
    DiagEmbed,
    BroadcastRow,
    ScaleRows,
    AddRowVec,
    Column,
  };

  struct Node {
    Op op;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    double s0 = 0.0, s1 = 0.0;       // scalar attrs (shift, clamp bounds, fill value)
    std::vector<std::int64_t> idx;   // index attrs (gather ids, slice bounds, ...)
    Mask mask;
    Tensor aux;                      // Inverse/LogDet: cached A^{-1}
    std::string param;
  };

  Var push(Node node);
  const Node& node(Var v) const { return nodes_[v.id]; }
  const Tensor& in(const Node& n, std::size_t i) const { return nodes_[n.inputs[i]].value; }
  static const char* op_name(Op op);
  void run_backward(Var loss, std::vector<Tensor>& grads);

  ParamStore* store_ = nullptr;
  std::string context_;
  std::vector<Node> nodes_;
};

}  // namespace arbolatent
