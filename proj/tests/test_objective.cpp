#include <cmath>
#include <random>

#include <Eigen/QR>

#include "doctest.h"

#include "firp/errors.hpp"
#include "firp/objective/grad_suite.hpp"
#include "firp/objective/total_loss.hpp"
#include "firp/plan/planner.hpp"

using namespace firp;
using namespace firp::objective;
using diff::standard_normal;
using diff::Vector;

namespace {

Vector v2(Real x, Real y) { return (Vector(2) << x, y).finished(); }

Real kl_scalar(Real mq, Real sq, Real mp, Real sp) {
  return std::log(sp / sq) + (sq * sq + (mq - mp) * (mq - mp)) / (2 * sp * sp) - 0.5;
}

DiagGaussian random_gaussian(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<Real> u(0.2, 2.0);
  Vector s(d);
  for (int i = 0; i < d; ++i) s(i) = u(rng);
  return DiagGaussian(standard_normal(rng, d, 1), s);
}

Real cosine(const Vector& a, const Vector& b) {
  const Real n = a.norm() * b.norm();
  return n == 0 ? 0 : a.dot(b) / n;
}

// Scalar-loop reference for the run-based ATC terms.
AtcTerms atc_reference(const Matrix& d, const std::vector<int>& cat) {
  std::vector<std::vector<int>> runs;
  for (int k = 0; k < d.rows(); ++k) {
    if (k == 0 || cat[k] != cat[k - 1]) runs.emplace_back();
    runs.back().push_back(k);
  }
  const Real C = static_cast<Real>(runs.size());
  std::vector<Vector> mu;
  AtcTerms out;
  for (const auto& r : runs) {
    Vector m = Vector::Zero(d.cols());
    for (int k : r) m += d.row(k).transpose();
    m /= static_cast<Real>(r.size());
    Real s = 0;
    for (int k : r) s += cosine(m, d.row(k).transpose());
    out.s_w += s / static_cast<Real>(r.size()) / C;
    mu.push_back(m);
  }
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::size_t j = i + 1; j < mu.size(); ++j) out.s_b += cosine(mu[i], mu[j]) / C;
  }
  out.r_atc = out.s_b - out.s_w;
  return out;
}

Matrix from_dirs(const std::vector<Vector>& dirs) {
  Matrix f = Matrix::Zero(static_cast<Eigen::Index>(dirs.size()) + 1, dirs.front().size());
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    f.row(static_cast<Eigen::Index>(k) + 1) = f.row(static_cast<Eigen::Index>(k)) + dirs[k].transpose();
  }
  return f;
}

}  // namespace

TEST_CASE("loss_kl value form") {
  std::mt19937_64 rng(1);
  std::vector<std::vector<DiagGaussian>> post(3), pri(3);
  for (int n = 0; n < 3; ++n) {
    for (int t = 0; t < 5; ++t) {
      post[n].push_back(random_gaussian(rng, 2));
      pri[n].push_back(random_gaussian(rng, 2));
    }
  }
  CHECK(loss_kl(post, post, 1) == 0.0);
  for (int tau : {1, 2, 4}) {
    Real ref = 0;
    for (int n = 0; n < 3; ++n) {
      for (int t = tau; t < 5; ++t) {
        for (int i = 0; i < 2; ++i) {
          ref += kl_scalar(post[n][t].mean(i), post[n][t].stddev(i), pri[n][t].mean(i), pri[n][t].stddev(i));
        }
      }
    }
    CHECK(loss_kl(post, pri, tau) == doctest::Approx(ref / 15).epsilon(1e-12));
  }
  const std::vector<std::vector<DiagGaussian>> one{{post[0][0], post[0][1]}}, two{{pri[0][0], pri[0][1]}};
  CHECK(loss_kl(one, two, 1) == doctest::Approx(diff::gaussian_kl(post[0][1], pri[0][1]) / 2).epsilon(1e-14));
}

TEST_CASE("loss_re value form") {
  Matrix e(2, 2), z = Matrix::Zero(2, 2);
  e << 5.0, 5.0, 1.0, 0.0;
  CHECK(loss_re({e}, {e}, 1) == 0.0);
  CHECK(loss_re({e}, {z}, 1) == doctest::Approx(0.5).epsilon(1e-15));

  std::mt19937_64 rng(2);
  std::vector<Matrix> a, b;
  for (int n = 0; n < 4; ++n) {
    a.push_back(standard_normal(rng, 6, 3));
    b.push_back(standard_normal(rng, 6, 3));
  }
  for (int tau : {1, 3}) {
    Real ref = 0;
    for (int n = 0; n < 4; ++n) {
      for (int t = tau; t < 6; ++t) {
        for (int i = 0; i < 3; ++i) ref += (a[n](t, i) - b[n](t, i)) * (a[n](t, i) - b[n](t, i));
      }
    }
    CHECK(loss_re(a, b, tau) == doctest::Approx(ref / 24).epsilon(1e-12));
  }
}

TEST_CASE("loss_ce") {
  CHECK(loss_ce({1.0}, {1}) == doctest::Approx(1e-7).epsilon(1e-3));
  CHECK(loss_ce({0.5}, {0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss_ce({0.5}, {1}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss_ce({0.8, 0.3}, {1, 1}) == doctest::Approx(-(std::log(0.8) + std::log(0.3)) / 2).epsilon(1e-14));
  CHECK_THROWS_AS(loss_ce({1.5}, {1}), DomainError);
  CHECK_THROWS_AS(loss_ce({0.5, 0.5}, {1}), DimensionError);
}

TEST_CASE("directions") {
  Matrix c = Matrix::Constant(4, 3, 2.5);
  CHECK(directions(c, {0, 0, 0}).d.norm() == 0.0);
  const Vector v = (Vector(3) << 1.0, -2.0, 0.5).finished();
  Matrix lin(5, 3);
  for (int t = 0; t < 5; ++t) lin.row(t) = (t + 1) * v.transpose();
  const DirectionSeq ds = directions(lin, {1, 1, 2, 2});
  CHECK(ds.d.rows() == 4);
  for (int k = 0; k < 4; ++k) CHECK((ds.d.row(k).transpose() - v).norm() < 1e-12);
  CHECK(ds.categories == std::vector<int>{1, 1, 2, 2});

  std::mt19937_64 rng(3);
  const Matrix e = standard_normal(rng, 7, 4);
  const DirectionSeq r = directions(e, std::vector<int>(6, 0));
  CHECK((e.row(0) + r.d.colwise().sum() - e.row(6)).norm() < 1e-12);
}

TEST_CASE("r_ttc examples") {
  const Vector right = v2(1, 0), up = v2(0, 1), left = v2(-1, 0), down = v2(0, -1);
  const TtcTerms straight = r_ttc(directions(from_dirs({right, right, right, right, right}), std::vector<int>(5, 0)));
  CHECK(straight.r_ttc == 0.0);
  const TtcTerms turn = r_ttc(directions(from_dirs({right, up, left, down, right, up}), std::vector<int>(6, 0)));
  CHECK(turn.r_ttc == doctest::Approx(0.0).epsilon(1e-12));

  const TtcTerms kink = r_ttc(directions(from_dirs({right, right, up, right, right}), std::vector<int>(5, 0)));
  CHECK(kink.r_sm == doctest::Approx(M_PI * M_PI / 2).epsilon(1e-12));
  CHECK(kink.r_sp == doctest::Approx(M_PI).epsilon(1e-12));
  CHECK(std::abs(kink.r_ttc - 8.0764) < 1e-4);
  CHECK(kink.r_ttc == doctest::Approx(M_PI * M_PI / 2 + M_PI).epsilon(1e-12));

  const TtcTerms short_seq = r_ttc(directions(from_dirs({right, up, right}), std::vector<int>(3, 0)));
  CHECK(short_seq.r_ttc == 0.0);
}

TEST_CASE("r_atc examples") {
  const Vector right = v2(1, 0), left = v2(-1, 0);
  const AtcTerms one = r_atc(directions(from_dirs({right, right, right}), {2, 2, 2}));
  CHECK(one.s_w == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(one.s_b == 0.0);
  CHECK(one.r_atc == doctest::Approx(-1.0).epsilon(1e-12));

  // S_b divides the pair sum by the run count C, so one opposite pair over
  // C = 2 runs gives -1/2.
  const AtcTerms two = r_atc(directions(from_dirs({right, right, left, left}), {0, 0, 3, 3}));
  CHECK(two.s_w == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(two.s_b == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(two.r_atc == doctest::Approx(-1.5).epsilon(1e-12));

  const std::vector<Vector> picked{v2(1, 2), v2(3, -1), v2(-2, 0.5), v2(0.3, 0.7)};
  const std::vector<int> cats{4, 4, 6, 6};
  const AtcTerms got = r_atc(directions(from_dirs(picked), cats));
  const AtcTerms ref = atc_reference(directions(from_dirs(picked), cats).d, cats);
  CHECK(got.s_w == doctest::Approx(ref.s_w).epsilon(1e-12));
  CHECK(got.s_b == doctest::Approx(ref.s_b).epsilon(1e-12));

  // Repeated categories count as separate runs.
  const std::vector<int> rep{1, 1, 2, 1};
  const AtcTerms r3 = r_atc(directions(from_dirs(picked), rep));
  const AtcTerms ref3 = atc_reference(directions(from_dirs(picked), rep).d, rep);
  CHECK(r3.r_atc == doctest::Approx(ref3.r_atc).epsilon(1e-12));
}

TEST_CASE("regularizer ranges and rotation invariance") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> cat(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const int T = 3 + trial % 9;
    const Matrix e = standard_normal(rng, T, 4);
    std::vector<int> cats(T - 1);
    for (int& c : cats) c = cat(rng);
    const DirectionSeq ds = directions(e, cats);
    const TtcTerms t = r_ttc(ds);
    const AtcTerms a = r_atc(ds);
    CHECK(t.r_ttc >= 0.0);
    CHECK((t.r_sp == 0.0) == (t.r_sm == 0.0));
    CHECK((a.s_w >= -1 - 1e-12 && a.s_w <= 1 + 1e-12));
    // |sum of unit means|^2 >= 0 bounds the pair sum below by -C/2.
    std::size_t runs = 1;
    for (std::size_t k = 1; k < cats.size(); ++k) runs += cats[k] != cats[k - 1];
    CHECK((a.s_b >= -0.5 - 1e-12 && a.s_b <= 0.5 * static_cast<Real>(runs - 1) + 1e-12));
    CHECK(a.r_atc == doctest::Approx(atc_reference(ds.d, cats).r_atc).epsilon(1e-10));

    const Eigen::HouseholderQR<Matrix> qr(standard_normal(rng, 4, 4));
    const Matrix Q = qr.householderQ();
    const DirectionSeq rot = directions(e * Q, cats);
    CHECK(r_ttc(rot).r_ttc == doctest::Approx(t.r_ttc).epsilon(1e-8));
    CHECK(r_atc(rot).r_atc == doctest::Approx(a.r_atc).epsilon(1e-10));
  }
}

TEST_CASE("tape regularizers match the value forms") {
  std::mt19937_64 rng(5);
  const Matrix e = standard_normal(rng, 8, 3);
  const std::vector<int> cats{0, 0, 1, 1, 1, 2, 0};
  diff::Tape tape;
  Var d = objective::directions(tape.constant(e));
  const DirectionSeq ds = directions(e, cats);
  CHECK(r_ttc(d).r_ttc.scalar() == doctest::Approx(r_ttc(ds).r_ttc).epsilon(1e-12));
  CHECK(r_atc(d, cats).r_atc.scalar() == doctest::Approx(r_atc(ds).r_atc).epsilon(1e-12));
}

TEST_CASE("overshoot set") {
  CHECK(overshoot_set({2, 4, 8, 16}, 6) == std::vector<int>{2, 4, 5});
  CHECK(overshoot_set({1, 3, 3}, 10) == std::vector<int>{3});
  CHECK(overshoot_set({2}, 2).empty());
}

TEST_CASE("total loss bookkeeping") {
  const world::TaskSpec spec = world::TaskSpec::stacking();
  const auto eps = plan::generate_episodes(spec, 4, 0.005, 7);
  const Batch batch = make_batch(eps);
  model::ModelDims dims = GradSuiteConfig::micro_dims();
  dims.D = 9;
  model::FirpModel m(dims, 3);

  ObjectiveConfig zero;
  zero.lambda = zero.alpha = zero.beta = 0;
  std::mt19937_64 r1(1);
  const LossReport z = total_loss(m, batch, zero, r1, false);
  CHECK(z.total == doctest::Approx(z.ce + z.kl.at(1) + z.re.at(1)).epsilon(1e-14));

  ObjectiveConfig cfg;
  cfg.lambda = 0.7;
  cfg.alpha = cfg.beta = 0;
  std::mt19937_64 r2(1);
  const LossReport full = total_loss(m, batch, cfg, r2, false);
  Real over = 0;
  for (int tau : overshoot_set(cfg.overshoot, batch.T)) over += full.kl.at(tau) + full.re.at(tau);
  CHECK(full.total ==
        doctest::Approx(full.ce + full.kl.at(1) + full.re.at(1) + cfg.lambda / (batch.T - 1) * over).epsilon(1e-12));

  cfg.alpha = 0.3;
  cfg.beta = 0.2;
  std::mt19937_64 r3(1);
  const LossReport tcr = total_loss(m, batch, cfg, r3, false);
  CHECK(tcr.total == doctest::Approx(full.total + 0.3 * tcr.r_ttc + 0.2 * tcr.r_atc).epsilon(1e-12));
  CHECK(tcr.f_weight == 1.0);

  cfg.prediction = false;
  std::mt19937_64 r4(1);
  const LossReport ce_only = total_loss(m, batch, cfg, r4, false);
  CHECK(ce_only.f_weight == 0.0);
  CHECK(ce_only.total == doctest::Approx(ce_only.ce + 0.3 * ce_only.r_ttc + 0.2 * ce_only.r_atc).epsilon(1e-12));

  for (auto& [name, p] : m.params()) p.value.setZero();
  std::mt19937_64 r5(1);
  const LossReport zp = total_loss(m, batch, cfg, r5, false);
  CHECK(zp.r_ttc == 0.0);
  CHECK(zp.r_atc == 0.0);
}

TEST_CASE("make_batch checks horizons") {
  auto a = plan::generate_episodes(world::TaskSpec::stacking(), 2, 0.005, 1);
  const auto b = plan::generate_episodes(world::TaskSpec::replacement(), 1, 0.02, 1);
  a.push_back(b[0]);
  CHECK_THROWS_AS(make_batch(a), DimensionError);
}

TEST_CASE("every objective term passes the gradient suite") {
  GradSuiteConfig cfg;
  cfg.instances = 4;
  const GradSuiteResult res = run_grad_suite(cfg);
  CHECK(res.rows.size() == 4 * grad_suite_terms().size());
  for (const GradTermResult& r : res.rows) {
    INFO(r.term, " instance ", r.instance, " at ", r.worst_param);
    CHECK(r.max_rel_error < 1e-4);
  }
  CHECK(res.pass);
}
