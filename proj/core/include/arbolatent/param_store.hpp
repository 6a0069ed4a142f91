#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arbolatent/tensor.hpp"

namespace arbolatent {

enum class InitKind {
  Zeros,
  Glorot,    // uniform(-a, a), a = sqrt(6 / (fan_in + fan_out))
  Uniform,   // uniform(-range, range)
  External,  // value provided at declaration, untouched by initialize()
};

struct InitSpec {
  InitKind kind = InitKind::Zeros;
  double range = 0.0;
};

struct Param {
  Tensor value;
  Tensor grad;
  InitSpec init;
};

// Named parameter tensors with paired gradient buffers. Iteration order is the
// name order, which keeps every reduction over parameters deterministic.
class ParamStore {
 public:
  void declare(const std::string& name, std::vector<std::size_t> shape, InitSpec spec);
  void declare_external(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;

  void zero_grads();

  // Seeded fill of every non-External parameter, in name order.
  void initialize(std::uint64_t seed);

  std::map<std::string, Param>& params() { return params_; }
  const std::map<std::string, Param>& params() const { return params_; }

  std::size_t scalar_count() const;

  ParamStore clone() const { return *this; }

 private:
  const Param& find(const std::string& name) const;
  Param& find(const std::string& name);

  std::map<std::string, Param> params_;
};

}  // namespace arbolatent
