#include "firp/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "firp/errors.hpp"

namespace firp::diff {
namespace {

using RowArray = Eigen::Array<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tape& tape_of(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw Error("operands recorded on different tapes");
  }
  return *a.tape();
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()) + ")");
  }
}

// Adds `delta` into the gradient of `v` if it participates in the backward sweep.
template <typename Expr>
void accumulate(Tape& t, Var v, const Expr& delta) {
  if (t.requires_grad(v.id())) t.grad(v.id()) += delta;
}

template <typename Fn, typename Deriv>
Var unary(Var a, Fn fn, Deriv deriv) {
  Tape& t = *a.tape();
  Matrix out = a.value().unaryExpr(fn);
  return t.record(std::move(out), {a}, [a, deriv](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(a.id());
    const Matrix& y = t.value(self);
    Matrix d(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) d.data()[i] = deriv(x.data()[i], y.data()[i]);
    accumulate(t, a, g.cwiseProduct(d));
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + ")");
  }
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.grad(a.id()).noalias() += g * t.value(b.id()).transpose();
    if (t.requires_grad(b.id())) t.grad(b.id()).noalias() += t.value(a.id()).transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "add");
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g);
    accumulate(t, b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "sub");
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g);
    accumulate(t, b, -g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "mul");
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g.cwiseProduct(t.value(b.id())));
    accumulate(t, b, g.cwiseProduct(t.value(a.id())));
  });
}

Var scale(Var a, Real s) {
  Tape& t = *a.tape();
  return t.record(a.value() * s, {a}, [a, s](Tape& t, int self) { accumulate(t, a, t.grad(self) * s); });
}

Var add_scalar(Var a, Real s) {
  Tape& t = *a.tape();
  Matrix out = a.value().array() + s;
  return t.record(std::move(out), {a}, [a](Tape& t, int self) { accumulate(t, a, t.grad(self)); });
}

Var add_row(Var a, Var bias) {
  Tape& t = tape_of(a, bias);
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw DimensionError("add_row: bias must be 1x" + std::to_string(a.cols()));
  }
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return t.record(std::move(out), {a, bias}, [a, bias](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g);
    accumulate(t, bias, g.colwise().sum());
  });
}

Var mul_col(Var a, Var w) {
  Tape& t = tape_of(a, w);
  if (w.cols() != 1 || w.rows() != a.rows()) throw DimensionError("mul_col: weight must be n x 1");
  Matrix out = a.value().array().colwise() * w.value().col(0).array();
  return t.record(std::move(out), {a, w}, [a, w](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) {
      t.grad(a.id()).array() += g.array().colwise() * t.value(w.id()).col(0).array();
    }
    if (t.requires_grad(w.id())) {
      t.grad(w.id()) += g.cwiseProduct(t.value(a.id())).rowwise().sum();
    }
  });
}

Var relu(Var a) {
  return unary(
      a, [](Real x) { return x > 0 ? x : Real(0); }, [](Real x, Real) { return x > 0 ? Real(1) : Real(0); });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](Real x) {
        if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
        Real e = std::exp(x);
        return e / (Real(1) + e);
      },
      [](Real, Real y) { return y * (Real(1) - y); });
}

Var tanh(Var a) {
  return unary(a, [](Real x) { return std::tanh(x); }, [](Real, Real y) { return Real(1) - y * y; });
}

Var softplus(Var a) {
  return unary(
      a, [](Real x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](Real x, Real) {
        if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
        Real e = std::exp(x);
        return e / (Real(1) + e);
      });
}

Var square(Var a) {
  return unary(a, [](Real x) { return x * x; }, [](Real x, Real) { return 2 * x; });
}

Var abs(Var a) {
  return unary(
      a, [](Real x) { return std::abs(x); },
      [](Real x, Real) { return x > 0 ? Real(1) : (x < 0 ? Real(-1) : Real(0)); });
}

Var log(Var a) {
  if ((a.value().array() <= 0).any()) throw DomainError("log of a non-positive value");
  return unary(a, [](Real x) { return std::log(x); }, [](Real x, Real) { return Real(1) / x; });
}

Var acos_clamped(Var a) {
  return unary(
      a, [](Real x) { return std::acos(std::clamp(x, Real(-1), Real(1))); },
      [](Real x, Real) {
        Real r = Real(1) - x * x;
        if (r <= Real(1e-12)) return Real(0);
        return -Real(1) / std::sqrt(r);
      });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a}, [a](Tape& t, int self) {
    Real g = t.grad(self)(0, 0);
    if (t.requires_grad(a.id())) t.grad(a.id()).array() += g;
  });
}

Var row_sum(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().rowwise().sum();
  return t.record(std::move(out), {a}, [a](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.grad(a.id()).colwise() += g.col(0);
  });
}

Var col_sum(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().colwise().sum();
  return t.record(std::move(out), {a}, [a](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a.id())) t.grad(a.id()).rowwise() += g.row(0);
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ca = a.cols();
  const Eigen::Index cb = b.cols();
  return t.record(std::move(out), {a, b}, [a, b, ca, cb](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, a, g.leftCols(ca));
    accumulate(t, b, g.rightCols(cb));
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Tape& t = *parts.front().tape();
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const Var& p : parts) {
    if (p.tape() != &t) throw Error("operands recorded on different tapes");
    if (p.cols() != cols) throw DimensionError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t.record(std::move(out), parts, [parts](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Eigen::Index r = 0;
    for (const Var& p : parts) {
      const Eigen::Index n = t.value(p.id()).rows();
      accumulate(t, p, g.middleRows(r, n));
      r += n;
    }
  });
}

Var slice_cols(Var a, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > a.cols()) throw DimensionError("slice_cols out of range");
  Tape& t = *a.tape();
  Matrix out = a.value().middleCols(first, count);
  return t.record(std::move(out), {a}, [a, first, count](Tape& t, int self) {
    if (t.requires_grad(a.id())) t.grad(a.id()).middleCols(first, count) += t.grad(self);
  });
}

Var slice_rows(Var a, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > a.rows()) throw DimensionError("slice_rows out of range");
  Tape& t = *a.tape();
  Matrix out = a.value().middleRows(first, count);
  return t.record(std::move(out), {a}, [a, first, count](Tape& t, int self) {
    if (t.requires_grad(a.id())) t.grad(a.id()).middleRows(first, count) += t.grad(self);
  });
}

Var gather_rows(Var a, const std::vector<int>& index) {
  Tape& t = *a.tape();
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= a.rows()) throw DimensionError("gather_rows index out of range");
    out.row(static_cast<Eigen::Index>(k)) = a.value().row(index[k]);
  }
  return t.record(std::move(out), {a}, [a, index](Tape& t, int self) {
    if (!t.requires_grad(a.id())) return;
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a.id());
    for (std::size_t k = 0; k < index.size(); ++k) ga.row(index[k]) += g.row(static_cast<Eigen::Index>(k));
  });
}

Var row_cosine(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "row_cosine");
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  const Eigen::Index n = x.rows();
  Matrix out(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    Real nx = x.row(i).norm();
    Real ny = y.row(i).norm();
    out(i, 0) = (nx > 0 && ny > 0) ? x.row(i).dot(y.row(i)) / (nx * ny) : Real(0);
  }
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(a.id());
    const Matrix& y = t.value(b.id());
    const Matrix& c = t.value(self);
    const bool ga = t.requires_grad(a.id());
    const bool gb = t.requires_grad(b.id());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Real nx = x.row(i).norm();
      Real ny = y.row(i).norm();
      if (nx <= 0 || ny <= 0) continue;
      // d cos / dx = y / (|x||y|) - cos * x / |x|^2
      if (ga) t.grad(a.id()).row(i) += g(i, 0) * (y.row(i) / (nx * ny) - c(i, 0) * x.row(i) / (nx * nx));
      if (gb) t.grad(b.id()).row(i) += g(i, 0) * (x.row(i) / (nx * ny) - c(i, 0) * y.row(i) / (ny * ny));
    }
  });
}

Var gaussian_kl_rows(Var q_mean, Var q_std, Var p_mean, Var p_std) {
  Tape& t = tape_of(q_mean, p_mean);
  require_same_shape(q_mean, q_std, "gaussian_kl");
  require_same_shape(q_mean, p_mean, "gaussian_kl");
  require_same_shape(q_mean, p_std, "gaussian_kl");
  if ((q_std.value().array() <= 0).any() || (p_std.value().array() <= 0).any()) {
    throw DomainError("gaussian_kl: standard deviations must be positive");
  }
  const auto& qm = q_mean.value().array();
  const auto& qs = q_std.value().array();
  const auto& pm = p_mean.value().array();
  const auto& ps = p_std.value().array();
  Matrix terms = ((ps / qs).log() + (qs.square() + (qm - pm).square()) / (2 * ps.square()) - Real(0.5)).matrix();
  Matrix out = terms.rowwise().sum();
  return t.record(std::move(out), {q_mean, q_std, p_mean, p_std},
                  [q_mean, q_std, p_mean, p_std](Tape& t, int self) {
                    const Matrix& g = t.grad(self);
                    const auto qm = t.value(q_mean.id()).array();
                    const auto qs = t.value(q_std.id()).array();
                    const auto pm = t.value(p_mean.id()).array();
                    const auto ps = t.value(p_std.id()).array();
                    const auto gb = g.col(0).array();
                    RowArray diff = qm - pm;
                    RowArray pv = ps.square();
                    if (t.requires_grad(q_mean.id())) {
                      t.grad(q_mean.id()).array() += (diff / pv).colwise() * gb;
                    }
                    if (t.requires_grad(p_mean.id())) {
                      t.grad(p_mean.id()).array() -= (diff / pv).colwise() * gb;
                    }
                    if (t.requires_grad(q_std.id())) {
                      t.grad(q_std.id()).array() += (qs / pv - qs.inverse()).colwise() * gb;
                    }
                    if (t.requires_grad(p_std.id())) {
                      t.grad(p_std.id()).array() +=
                          (ps.inverse() - (qs.square() + diff.square()) / (pv * ps)).colwise() * gb;
                    }
                  });
}

Var binary_cross_entropy(Var p, const std::vector<int>& labels) {
  Tape& t = *p.tape();
  if (p.cols() != 1 || p.rows() != static_cast<Eigen::Index>(labels.size()) || labels.empty()) {
    throw DimensionError("binary_cross_entropy: expected n x 1 probabilities for n labels");
  }
  constexpr Real kEps = 1e-7;
  const Matrix& pv = p.value();
  if (!pv.allFinite() || (pv.array() < 0).any() || (pv.array() > 1).any()) {
    throw DomainError("binary_cross_entropy: probability outside [0, 1]");
  }
  const auto n = static_cast<Real>(labels.size());
  Real loss = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Real q = std::clamp(pv(static_cast<Eigen::Index>(i), 0), kEps, 1 - kEps);
    loss -= labels[i] != 0 ? std::log(q) : std::log(1 - q);
  }
  Matrix out(1, 1);
  out(0, 0) = loss / n;
  return t.record(std::move(out), {p}, [p, labels, n](Tape& t, int self) {
    if (!t.requires_grad(p.id())) return;
    Real g = t.grad(self)(0, 0);
    const Matrix& pv = t.value(p.id());
    Matrix& gp = t.grad(p.id());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      Real raw = pv(r, 0);
      if (raw < kEps || raw > 1 - kEps) continue;
      gp(r, 0) += g * (labels[i] != 0 ? -1 / raw : 1 / (1 - raw)) / n;
    }
  });
}

Var pool_weights(Var q, Var prototypes, Real temperature, int steps, int episodes) {
  Tape& t = tape_of(q, prototypes);
  if (steps < 1 || episodes < 1 || q.rows() != static_cast<Eigen::Index>(steps) * episodes) {
    throw DimensionError("pool_weights: q must have steps * episodes rows");
  }
  if (prototypes.cols() != q.cols()) throw DimensionError("pool_weights: prototype width differs from q");
  if (!(temperature > 0)) throw DomainError("pool_weights: temperature must be positive");
  const Matrix& qv = q.value();
  const Matrix& pv = prototypes.value();
  const Eigen::Index m = pv.rows();
  const Eigen::Index rows = qv.rows();

  Vector qn = qv.rowwise().norm();
  Vector pn = pv.rowwise().norm();
  // cos(row, prototype), zero when either norm vanishes.
  Matrix cos = qv * pv.transpose();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index i = 0; i < m; ++i) {
      cos(r, i) = (qn(r) > 0 && pn(i) > 0) ? cos(r, i) / (qn(r) * pn(i)) : Real(0);
    }
  }
  // Softmax over time for each (episode, prototype).
  Matrix soft(rows, m);
  for (int b = 0; b < episodes; ++b) {
    for (Eigen::Index i = 0; i < m; ++i) {
      Real mx = -std::numeric_limits<Real>::infinity();
      for (int s = 0; s < steps; ++s) mx = std::max(mx, cos(s * episodes + b, i) / temperature);
      Real z = 0;
      for (int s = 0; s < steps; ++s) {
        Real e = std::exp(cos(s * episodes + b, i) / temperature - mx);
        soft(s * episodes + b, i) = e;
        z += e;
      }
      for (int s = 0; s < steps; ++s) soft(s * episodes + b, i) /= z;
    }
  }
  Matrix out = soft.rowwise().mean();
  return t.record(std::move(out), {q, prototypes},
                  [q, prototypes, temperature, steps, episodes, cos, soft, qn, pn](Tape& t, int self) {
                    const Matrix& g = t.grad(self);
                    const Matrix& qv = t.value(q.id());
                    const Matrix& pv = t.value(prototypes.id());
                    const Eigen::Index m = pv.rows();
                    const Eigen::Index rows = qv.rows();
                    // dL/dcos(r,i) = (1/M) * (1/L) * soft(r,i) * (g(r) - sum_s soft(s,i) g(s))
                    Matrix dcos(rows, m);
                    for (int b = 0; b < episodes; ++b) {
                      for (Eigen::Index i = 0; i < m; ++i) {
                        Real avg = 0;
                        for (int s = 0; s < steps; ++s) {
                          avg += soft(s * episodes + b, i) * g(s * episodes + b, 0);
                        }
                        for (int s = 0; s < steps; ++s) {
                          const Eigen::Index r = s * episodes + b;
                          dcos(r, i) = soft(r, i) * (g(r, 0) - avg) / (temperature * static_cast<Real>(m));
                        }
                      }
                    }
                    const bool gq = t.requires_grad(q.id());
                    const bool gp = t.requires_grad(prototypes.id());
                    Matrix dq = Matrix::Zero(rows, qv.cols());
                    Matrix dp = Matrix::Zero(m, pv.cols());
                    for (Eigen::Index r = 0; r < rows; ++r) {
                      if (qn(r) <= 0) continue;
                      for (Eigen::Index i = 0; i < m; ++i) {
                        if (pn(i) <= 0) continue;
                        const Real d = dcos(r, i);
                        if (d == 0) continue;
                        const Real c = cos(r, i);
                        if (gq) dq.row(r) += d * (pv.row(i) / (qn(r) * pn(i)) - c * qv.row(r) / (qn(r) * qn(r)));
                        if (gp) dp.row(i) += d * (qv.row(r) / (qn(r) * pn(i)) - c * pv.row(i) / (pn(i) * pn(i)));
                      }
                    }
                    if (gq) t.grad(q.id()) += dq;
                    if (gp) t.grad(prototypes.id()) += dp;
                  });
}

Var weighted_time_sum(Var q, Var w, int steps, int episodes) {
  Tape& t = tape_of(q, w);
  if (q.rows() != static_cast<Eigen::Index>(steps) * episodes || w.rows() != q.rows() || w.cols() != 1) {
    throw DimensionError("weighted_time_sum: expected steps * episodes rows and n x 1 weights");
  }
  const Matrix& qv = q.value();
  const Matrix& wv = w.value();
  Matrix out = Matrix::Zero(episodes, qv.cols());
  for (int s = 0; s < steps; ++s) {
    for (int b = 0; b < episodes; ++b) {
      const Eigen::Index r = static_cast<Eigen::Index>(s) * episodes + b;
      out.row(b) += wv(r, 0) * qv.row(r);
    }
  }
  return t.record(std::move(out), {q, w}, [q, w, steps, episodes](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& qv = t.value(q.id());
    const Matrix& wv = t.value(w.id());
    const bool gq = t.requires_grad(q.id());
    const bool gw = t.requires_grad(w.id());
    for (int s = 0; s < steps; ++s) {
      for (int b = 0; b < episodes; ++b) {
        const Eigen::Index r = static_cast<Eigen::Index>(s) * episodes + b;
        if (gq) t.grad(q.id()).row(r) += wv(r, 0) * g.row(b);
        if (gw) t.grad(w.id())(r, 0) += g.row(b).dot(qv.row(r));
      }
    }
  });
}

}  // namespace firp::diff
