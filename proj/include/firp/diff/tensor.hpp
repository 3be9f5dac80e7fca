#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace firp::diff {

using Real = double;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Real, 1, Eigen::Dynamic>;

/// Throws NumericError naming `what` if any entry is NaN or Inf.
void require_finite(const Matrix& m, const std::string& what);

/// A trainable array with its gradient slot. The gradient always has the
/// same shape as the value.
struct Parameter {
  Matrix value;
  Matrix grad;

  explicit Parameter(Matrix v = Matrix())
      : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
};

/// Named collection of parameters, iterated in name order.
class ParamSet {
 public:
  using Map = std::map<std::string, Parameter>;

  /// Throws ConfigError if `name` is already present.
  Parameter& add(const std::string& name, Matrix init);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grad();
  std::size_t scalar_count() const;
  std::size_t size() const { return params_.size(); }
  std::vector<std::string> names() const;

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  /// Element-wise equality of names, shapes and values.
  bool same_values(const ParamSet& other) const;

 private:
  Map params_;
};

}  // namespace firp::diff
