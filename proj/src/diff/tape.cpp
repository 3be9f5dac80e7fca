#include "firp/diff/tape.hpp"

#include <string>

#include "firp/errors.hpp"

namespace firp::diff {

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) {
    throw NumericError("non-finite value in " + what);
  }
}

Parameter& ParamSet::add(const std::string& name, Matrix init) {
  if (params_.count(name) != 0) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  return params_.emplace(name, Parameter(std::move(init))).first->second;
}

Parameter& ParamSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Parameter& ParamSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

void ParamSet::zero_grad() {
  for (auto& [name, p] : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, p] : params_) out.push_back(name);
  return out;
}

bool ParamSet::same_values(const ParamSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto a = params_.begin();
  auto b = other.params_.begin();
  for (; a != params_.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    const Matrix& va = a->second.value;
    const Matrix& vb = b->second.value;
    if (va.rows() != vb.rows() || va.cols() != vb.cols()) return false;
    if (va != vb) return false;
  }
  return true;
}

const Matrix& Var::value() const { return tape_->value(id_); }

Real Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw DimensionError("scalar() on a non-1x1 node");
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::scalar_constant(Real v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Tape::param(Parameter& p, bool trainable) {
  auto it = bound_.find(&p);
  if (it != bound_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = trainable;
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size()) - 1;
  bound_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backprop backprop) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || nodes_[p.id()].requires_grad;
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, Backprop backprop) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || nodes_[p.id()].requires_grad;
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad.setZero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

Matrix Tape::gradient(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

void Tape::backward(Var root) {
  if (done_) throw Error("Tape::backward called twice");
  done_ = true;
  if (root.tape() != this) throw Error("backward root belongs to another tape");
  Node& r = nodes_[root.id()];
  if (r.value.size() != 1) throw DimensionError("backward root must be 1x1");
  require_finite(r.value, "loss");
  if (!r.requires_grad) return;
  grad(root.id())(0, 0) = 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.requires_grad) continue;
    if (n.backprop) {
      n.backprop(*this, id);
      // Interior gradients are not needed after propagation.
      nodes_[id].grad = Matrix();
      nodes_[id].has_grad = false;
    } else if (n.param != nullptr) {
      n.param->grad += n.grad;
    }
  }
}

}  // namespace firp::diff
