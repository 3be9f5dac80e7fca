#include "firp/objective/regularizers.hpp"

#include "firp/errors.hpp"

namespace firp::objective {

namespace {

TtcVars zero_ttc(diff::Tape& tape) {
  Var z = tape.scalar_constant(0);
  return {z, z, z};
}

}  // namespace

DirectionSeq directions(const Matrix& features, const std::vector<int>& categories) {
  const auto T = features.rows();
  if (T < 2) throw DimensionError("directions need T >= 2");
  if (static_cast<Eigen::Index>(categories.size()) != T && static_cast<Eigen::Index>(categories.size()) != T - 1) {
    throw DimensionError("directions: expected one category per action");
  }
  DirectionSeq out;
  out.d = features.bottomRows(T - 1) - features.topRows(T - 1);
  out.categories.assign(categories.begin(), categories.begin() + (T - 1));
  return out;
}

Var directions(Var features) {
  const auto T = features.rows();
  if (T < 2) throw DimensionError("directions need T >= 2");
  return diff::sub(diff::slice_rows(features, 1, T - 1), diff::slice_rows(features, 0, T - 1));
}

TtcVars r_ttc(Var dirs) {
  diff::Tape& tape = *dirs.tape();
  const auto n = dirs.rows();  // T - 1
  if (n < 4) return zero_ttc(tape);
  Var later = diff::slice_rows(dirs, 1, n - 1);
  Var earlier = diff::slice_rows(dirs, 0, n - 1);
  Var theta = diff::acos_clamped(diff::row_cosine(later, earlier));
  // A zero direction has no angle; count it as aligned.
  Matrix mask(n - 1, 1);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const bool ok = later.value().row(k).squaredNorm() > 0 && earlier.value().row(k).squaredNorm() > 0;
    mask(k, 0) = ok ? 1.0 : 0.0;
  }
  theta = diff::mul(theta, tape.constant(mask));
  const auto m = n - 3;  // c_t for t = 4..T-1
  Var c = diff::sub(diff::sub(diff::scale(diff::slice_rows(theta, 1, m), 2.0), diff::slice_rows(theta, 0, m)),
                    diff::slice_rows(theta, 2, m));
  Var sm = diff::sum(diff::square(c));
  Var sp = diff::sum(diff::abs(c));
  return {sm, sp, diff::add(sm, sp)};
}

AtcVars r_atc(Var dirs, const std::vector<int>& categories) {
  diff::Tape& tape = *dirs.tape();
  const auto n = dirs.rows();
  if (n < 1 || static_cast<Eigen::Index>(categories.size()) != n) {
    throw DimensionError("r_atc: one category per direction required");
  }
  std::vector<int> run_of(static_cast<std::size_t>(n));
  std::vector<int> run_len;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k == 0 || categories[k] != categories[k - 1]) run_len.push_back(0);
    run_of[k] = static_cast<int>(run_len.size()) - 1;
    ++run_len.back();
  }
  const auto C = static_cast<Eigen::Index>(run_len.size());
  Matrix avg = Matrix::Zero(C, n);
  Matrix within_w(n, 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    avg(run_of[k], k) = 1.0 / run_len[run_of[k]];
    within_w(k, 0) = 1.0 / (static_cast<Real>(C) * run_len[run_of[k]]);
  }
  Var mu = diff::matmul(tape.constant(std::move(avg)), dirs);
  Var s_w = diff::sum(diff::mul(diff::row_cosine(diff::gather_rows(mu, run_of), dirs), tape.constant(within_w)));
  Var s_b = tape.scalar_constant(0);
  if (C > 1) {
    std::vector<int> I, J;
    for (int i = 0; i < C; ++i) {
      for (int j = i + 1; j < C; ++j) {
        I.push_back(i);
        J.push_back(j);
      }
    }
    s_b = diff::scale(diff::sum(diff::row_cosine(diff::gather_rows(mu, I), diff::gather_rows(mu, J))),
                      1.0 / static_cast<Real>(C));
  }
  return {s_w, s_b, diff::sub(s_b, s_w)};
}

TtcTerms r_ttc(const DirectionSeq& dirs) {
  diff::Tape tape;
  TtcVars v = r_ttc(tape.constant(dirs.d));
  return {v.r_sm.scalar(), v.r_sp.scalar(), v.r_ttc.scalar()};
}

AtcTerms r_atc(const DirectionSeq& dirs) {
  diff::Tape tape;
  AtcVars v = r_atc(tape.constant(dirs.d), dirs.categories);
  return {v.s_w.scalar(), v.s_b.scalar(), v.r_atc.scalar()};
}

}  // namespace firp::objective
