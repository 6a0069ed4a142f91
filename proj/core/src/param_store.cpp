#include "arbolatent/param_store.hpp"

#include <cmath>

#include "arbolatent/error.hpp"
#include "arbolatent/rng.hpp"

namespace arbolatent {

void ParamStore::declare(const std::string& name, std::vector<std::size_t> shape, InitSpec spec) {
  if (params_.count(name)) throw ValidationError("duplicate parameter name: " + name);
  Param p;
  p.value = Tensor(shape);
  p.grad = Tensor(shape);
  p.init = spec;
  params_.emplace(name, std::move(p));
}

void ParamStore::declare_external(const std::string& name, Tensor value) {
  if (params_.count(name)) throw ValidationError("duplicate parameter name: " + name);
  Param p;
  p.grad = Tensor(value.shape());
  p.value = std::move(value);
  p.init = InitSpec{InitKind::External, 0.0};
  params_.emplace(name, std::move(p));
}

const Param& ParamStore::find(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError("unknown parameter: " + name);
  return it->second;
}

Param& ParamStore::find(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValidationError("unknown parameter: " + name);
  return it->second;
}

Tensor& ParamStore::value(const std::string& name) { return find(name).value; }
const Tensor& ParamStore::value(const std::string& name) const { return find(name).value; }
Tensor& ParamStore::grad(const std::string& name) { return find(name).grad; }
const Tensor& ParamStore::grad(const std::string& name) const { return find(name).grad; }

void ParamStore::zero_grads() {
  for (auto& [name, p] : params_) p.grad.fill(0.0);
}

void ParamStore::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& [name, p] : params_) {
    switch (p.init.kind) {
      case InitKind::Zeros:
        p.value.fill(0.0);
        break;
      case InitKind::Glorot: {
        const std::size_t fan_out = p.value.rank() == 2 ? p.value.rows() : p.value.size();
        const std::size_t fan_in = p.value.rank() == 2 ? p.value.cols() : 1;
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.uniform(-a, a);
        break;
      }
      case InitKind::Uniform:
        for (std::size_t i = 0; i < p.value.size(); ++i) {
          p.value[i] = rng.uniform(-p.init.range, p.init.range);
        }
        break;
      case InitKind::External:
        break;
    }
    p.grad.fill(0.0);
  }
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

}  // namespace arbolatent
