#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "firp/diff/tensor.hpp"

namespace firp::diff {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid as long as the
/// tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  Real scalar() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode recording of a computation over dense matrices.
///
/// Each node owns its value and, during backward(), a gradient buffer. A node
/// requires a gradient iff one of its parents does; parameter leaves bound
/// with trainable=false and constants never do. After backward() the
/// gradients of parameter leaves are added into Parameter::grad.
class Tape {
 public:
  /// Receives the tape and the id of the node whose gradient is ready.
  using Backprop = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var scalar_constant(Real v);

  /// Binds a parameter as a leaf. Binding the same parameter twice returns
  /// the same node so gradients accumulate in one place.
  Var param(Parameter& p, bool trainable = true);

  /// Records an interior node. `backprop` is only stored (and called) when
  /// one of the parents requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, Backprop backprop);
  Var record(Matrix value, const std::vector<Var>& parents, Backprop backprop);

  /// Runs the reverse sweep from a 1x1 node and accumulates parameter
  /// gradients. May be called once per tape.
  void backward(Var root);

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node (allocated on first use, zero-initialized).
  Matrix& grad(int id);
  /// Gradient w.r.t. a node after backward(); zeros if none flowed.
  Matrix gradient(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> bound_;
  bool done_ = false;
};

}  // namespace firp::diff
