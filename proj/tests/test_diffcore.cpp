#include <cmath>
#include <random>

#include "doctest.h"

#include "firp/diff/gaussian.hpp"
#include "firp/diff/grad_check.hpp"
#include "firp/diff/gru.hpp"
#include "firp/errors.hpp"

using namespace firp;
using namespace firp::diff;

namespace {

Matrix randn(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) { return standard_normal(rng, r, c); }

Vector vec(std::initializer_list<Real> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (Real x : v) out(i++) = x;
  return out;
}

// Simpson's rule on q log(q/p) over +-(12 sigma).
Real kl_by_quadrature(Real mq, Real sq, Real mp, Real sp) {
  auto logpdf = [](Real x, Real m, Real s) {
    return -0.5 * std::log(2 * M_PI) - std::log(s) - 0.5 * (x - m) * (x - m) / (s * s);
  };
  const Real lo = mq - 12 * sq, hi = mq + 12 * sq;
  const int n = 20000;
  const Real h = (hi - lo) / n;
  Real acc = 0;
  for (int i = 0; i <= n; ++i) {
    const Real x = lo + i * h;
    const Real lq = logpdf(x, mq, sq);
    const Real f = std::exp(lq) * (lq - logpdf(x, mp, sp));
    acc += f * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
  }
  return acc * h / 3;
}

}  // namespace

TEST_CASE("gru_cell with zero weights halves h_prev") {
  std::mt19937_64 rng(1);
  ParamSet p;
  add_gru_params(p, "gru", 3, 2, rng);
  for (auto& [name, par] : p) par.value.setZero();
  const Vector h = gru_cell(vec({1.0, -2.0}), vec({0.3, -7.0, 2.0}), p);
  CHECK(h(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h(1) == doctest::Approx(-1.0).epsilon(1e-15));
  const Vector z = gru_cell(Vector::Zero(2), vec({5.0, 1.0, -1.0}), p);
  CHECK(z.norm() == 0.0);
}

TEST_CASE("gru_cell rejects mismatched shapes") {
  std::mt19937_64 rng(2);
  ParamSet p;
  add_gru_params(p, "gru", 3, 2, rng);
  CHECK_THROWS_AS(gru_cell(Vector::Zero(3), Vector::Zero(3), p), DimensionError);
  CHECK_THROWS_AS(gru_cell(Vector::Zero(2), Vector::Zero(4), p), DimensionError);
}

TEST_CASE("gru_cell output stays within max(|h_prev|, 1)") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    ParamSet p;
    add_gru_params(p, "gru", 4, 5, rng);
    for (auto& [name, par] : p) par.value = 3.0 * randn(rng, par.value.rows(), par.value.cols());
    const Vector h0 = 2.0 * randn(rng, 5, 1);
    const Vector h1 = gru_cell(h0, randn(rng, 4, 1), p);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(std::abs(h1(i)) <= std::max(std::abs(h0(i)), 1.0) + 1e-12);
  }
}

TEST_CASE("gru_cell gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    ParamSet p;
    add_gru_params(p, "gru", 3, 4, rng);
    p.add("h", randn(rng, 2, 4));
    p.add("x", randn(rng, 2, 3));
    const Matrix w = randn(rng, 2, 4);
    ScalarFn f = [&](Tape& t, ParamSet& ps) {
      GruVars g = bind_gru(t, ps, "gru");
      Var h = gru_cell(t.param(ps.at("h")), t.param(ps.at("x")), g);
      return sum(mul(h, t.constant(w)));
    };
    // Coordinates with gradients near 1e-5 are limited by rounding in the
    // differences, so an absolute gap under 1e-10 also passes.
    const GradCheckReport r = grad_check_report(f, p);
    CHECK((r.max_rel_error < 1e-6 || std::abs(r.analytic - r.numeric) < 1e-10));
  }
}

TEST_CASE("gaussian_kl closed form") {
  const DiagGaussian std1(vec({0.0}), vec({1.0}));
  CHECK(gaussian_kl(std1, std1) == 0.0);
  const DiagGaussian shifted(vec({1.0}), vec({1.0}));
  CHECK(gaussian_kl(shifted, std1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(gaussian_kl(shifted, std1) == doctest::Approx(kl_by_quadrature(1, 1, 0, 1)).epsilon(1e-9));

  const DiagGaussian a(vec({0.3}), vec({0.7})), b(vec({-1.1}), vec({1.9}));
  const DiagGaussian c(vec({2.0}), vec({0.4})), d(vec({0.5}), vec({0.8}));
  const DiagGaussian ac(vec({0.3, 2.0}), vec({0.7, 0.4})), bd(vec({-1.1, 0.5}), vec({1.9, 0.8}));
  CHECK(gaussian_kl(ac, bd) == doctest::Approx(gaussian_kl(a, b) + gaussian_kl(c, d)).epsilon(1e-14));
  CHECK(gaussian_kl(a, b) == doctest::Approx(kl_by_quadrature(0.3, 0.7, -1.1, 1.9)).epsilon(1e-8));
  CHECK(gaussian_kl(c, d) == doctest::Approx(kl_by_quadrature(2.0, 0.4, 0.5, 0.8)).epsilon(1e-8));
}

TEST_CASE("gaussian_kl is non-negative and zero only on equal parameters") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<Real> u(0.1, 3.0);
  for (int i = 0; i < 200; ++i) {
    Vector m = randn(rng, 3, 1), s(3);
    for (int k = 0; k < 3; ++k) s(k) = u(rng);
    const DiagGaussian q(m, s);
    CHECK(std::abs(gaussian_kl(q, q)) <= 1e-12);
    Vector m2 = m;
    m2(i % 3) += 0.05;
    CHECK(gaussian_kl(q, DiagGaussian(m2, s)) > 1e-12);
    CHECK(gaussian_kl(q, DiagGaussian(randn(rng, 3, 1), s)) >= 0.0);
  }
}

TEST_CASE("DiagGaussian and gaussian_kl errors") {
  CHECK_THROWS_AS(DiagGaussian(vec({0.0}), vec({0.0})), DomainError);
  CHECK_THROWS_AS(DiagGaussian(vec({0.0}), vec({-1.0})), DomainError);
  CHECK_THROWS_AS(DiagGaussian(vec({0.0, 1.0}), vec({1.0})), DimensionError);
  CHECK_THROWS_AS(gaussian_kl(DiagGaussian(vec({0.0}), vec({1.0})), DiagGaussian(vec({0.0, 0.0}), vec({1.0, 1.0}))),
                  DimensionError);
  Tape t;
  Var m = t.constant(Matrix::Zero(1, 2));
  Var bad = t.constant(Matrix::Zero(1, 2));
  CHECK_THROWS_AS(gaussian_kl_rows(m, bad, m, t.constant(Matrix::Ones(1, 2))), DomainError);
}

TEST_CASE("sample_reparam") {
  const DiagGaussian d(vec({1.5, -2.0}), vec({0.3, 2.0}));
  CHECK(sample_reparam(d, Vector::Zero(2)) == d.mean);
  const DiagGaussian tight(vec({1.5, -2.0}), vec({1e-12, 1e-12}));
  CHECK((sample_reparam(tight, vec({3.0, -4.0})) - tight.mean).norm() < 1e-10);
  CHECK_THROWS_AS(sample_reparam(d, Vector::Zero(3)), DimensionError);

  std::mt19937_64 r1(42), r2(42);
  CHECK(standard_normal(r1, 4, 3) == standard_normal(r2, 4, 3));
}

TEST_CASE("sample_reparam gradient reaches mean and stddev but not noise") {
  Tape t;
  Parameter mean(Matrix::Constant(1, 2, 0.5)), sd(Matrix::Constant(1, 2, 2.0));
  Matrix noise(1, 2);
  noise << 0.25, -1.0;
  Var eps = t.constant(noise);
  Var out = sample_reparam(t.param(mean), t.param(sd), noise);
  t.backward(sum(out));
  CHECK(mean.grad(0, 0) == 1.0);
  CHECK(sd.grad(0, 0) == 0.25);
  CHECK(sd.grad(0, 1) == -1.0);
  CHECK_FALSE(eps.requires_grad());
}

TEST_CASE("grad_check on simple functions") {
  ParamSet p;
  p.add("x", Matrix::Constant(1, 1, 3.0));
  GradCheckReport r = grad_check_report([](Tape& t, ParamSet& ps) { return sum(square(t.param(ps.at("x")))); }, p);
  CHECK(r.analytic == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(r.numeric == doctest::Approx(6.0).epsilon(1e-9));
  CHECK(r.max_rel_error < 1e-9);

  ParamSet lin;
  lin.add("w", Matrix::Constant(1, 3, 0.7));
  Matrix c(1, 3);
  c << 2.0, -3.0, 0.5;
  CHECK(grad_check([&](Tape& t, ParamSet& ps) { return sum(mul(t.param(ps.at("w")), t.constant(c))); }, lin) <
        1e-9);
}

TEST_CASE("grad_check on softmax cross-entropy") {
  std::mt19937_64 rng(5);
  ParamSet p;
  p.add("z", randn(rng, 1, 5));
  ScalarFn f = [](Tape& t, ParamSet& ps) {
    Var z = t.param(ps.at("z"));
    Var e = t.record(z.value().array().exp().matrix(), {z}, [z](Tape& tp, int id) {
      tp.grad(z.id()).array() += tp.grad(id).array() * tp.value(id).array();
    });
    Var logp = sub(z, t.record(Matrix::Constant(1, 5, std::log(e.value().sum())), {e},
                               [e](Tape& tp, int id) {
                                 const Real s = tp.value(e.id()).sum();
                                 tp.grad(e.id()).array() += tp.grad(id).sum() / s;
                               }));
    return scale(slice_cols(logp, 2, 1), -1.0);
  };
  CHECK(grad_check(f, p) < 1e-6);
}

TEST_CASE("grad_check rejects non-finite functions") {
  ParamSet p;
  p.add("x", Matrix::Constant(1, 1, 0.0));
  ScalarFn f = [](Tape& t, ParamSet& ps) { return sum(log(abs(t.param(ps.at("x"))))); };
  CHECK_THROWS_AS(grad_check(f, p), Error);
}

TEST_CASE("composite ops pass grad_check over 10 seeds") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    ParamSet p;
    p.add("a", randn(rng, 6, 3));
    p.add("b", randn(rng, 6, 3));
    p.add("sa", randn(rng, 6, 3));
    p.add("sb", randn(rng, 6, 3));
    p.add("proto", randn(rng, 2, 3));
    p.add("w", randn(rng, 6, 1));
    const Matrix noise = randn(rng, 6, 3);
    const Matrix c = randn(rng, 6, 3);
    auto pos = [&](Tape& t, const char* n) { return add_scalar(softplus(t.param(p.at(n))), 1e-2); };
    auto a = [&](Tape& t) { return t.param(p.at("a")); };
    auto b = [&](Tape& t) { return t.param(p.at("b")); };
    auto dot = [&](Var v) { return sum(mul(v, v.tape()->constant(c.topRows(v.rows()).leftCols(v.cols())))); };

    CHECK(grad_check([&](Tape& t, ParamSet&) { return sum(gaussian_kl_rows(a(t), pos(t, "sa"), b(t), pos(t, "sb"))); },
                     p) < 1e-5);
    CHECK(grad_check([&](Tape& t, ParamSet&) { return dot(sample_reparam(a(t), pos(t, "sa"), noise)); }, p) < 1e-5);
    CHECK(grad_check([&](Tape& t, ParamSet&) { return sum(row_cosine(a(t), b(t))); }, p) < 1e-5);
    CHECK(grad_check([&](Tape& t, ParamSet&) { return sum(acos_clamped(scale(row_cosine(a(t), b(t)), 0.9))); }, p) <
          1e-5);
    CHECK(grad_check(
              [&](Tape& t, ParamSet&) {
                Var w = pool_weights(a(t), t.param(p.at("proto")), 0.5, 3, 2);
                return dot(weighted_time_sum(b(t), w, 3, 2));
              },
              p) < 1e-5);
    CHECK(grad_check(
              [&](Tape& t, ParamSet&) {
                Var prob = sigmoid(t.param(p.at("w")));
                return binary_cross_entropy(prob, {0, 1, 1, 0, 1, 0});
              },
              p) < 1e-5);
    CHECK(grad_check([&](Tape& t, ParamSet&) { return dot(tanh(relu(add(a(t), b(t))))); }, p) < 1e-5);
  }
}

TEST_CASE("ops throw on shape mismatch") {
  Tape t;
  Var a = t.constant(Matrix::Ones(2, 3));
  Var b = t.constant(Matrix::Ones(3, 2));
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
  CHECK_THROWS_AS(row_cosine(a, b), DimensionError);
  CHECK_NOTHROW(matmul(a, b));
}

TEST_CASE("row_cosine of a zero row is zero with zero gradient") {
  Tape t;
  Parameter a(Matrix::Zero(1, 3)), b(Matrix::Ones(1, 3));
  Var c = row_cosine(t.param(a), t.param(b));
  CHECK(c.scalar() == 0.0);
  t.backward(sum(c));
  CHECK(a.grad.norm() == 0.0);
  CHECK(b.grad.norm() == 0.0);
}

TEST_CASE("ParamSet invariants") {
  ParamSet p;
  p.add("w", Matrix::Ones(2, 3));
  CHECK_THROWS_AS(p.add("w", Matrix::Ones(1, 1)), ConfigError);
  CHECK(p.at("w").grad.rows() == 2);
  CHECK(p.at("w").grad.cols() == 3);
  CHECK(p.scalar_count() == 6);
  CHECK_THROWS(require_finite(Matrix::Constant(1, 1, NAN), "x"));
}

TEST_CASE("pool weights sum to one per episode") {
  std::mt19937_64 rng(6);
  Tape t;
  Var q = t.constant(randn(rng, 4 * 3, 5));
  Var w = pool_weights(q, t.constant(randn(rng, 3, 5)), 0.5, 4, 3);
  for (int b = 0; b < 3; ++b) {
    Real s = 0;
    for (int k = 0; k < 4; ++k) s += w.value()(k * 3 + b, 0);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}
