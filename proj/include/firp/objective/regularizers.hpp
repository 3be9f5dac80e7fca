#pragma once

#include <vector>

#include "firp/diff/ops.hpp"

namespace firp::objective {

using diff::Matrix;
using diff::Real;
using diff::Var;

/// d_2..d_T as rows of a (T-1) x d matrix, with the category of the action
/// that produced each one (the action between e_{t-1} and e_t).
struct DirectionSeq {
  Matrix d;
  std::vector<int> categories;
};

/// `features` is T x d; `categories` holds one id per action (length T or T-1).
DirectionSeq directions(const Matrix& features, const std::vector<int>& categories);

struct TtcTerms {
  Real r_sm = 0;
  Real r_sp = 0;
  Real r_ttc = 0;
};

struct AtcTerms {
  Real s_w = 0;
  Real s_b = 0;
  Real r_atc = 0;
};

TtcTerms r_ttc(const DirectionSeq& dirs);
AtcTerms r_atc(const DirectionSeq& dirs);

// Tape forms over a (T-1) x d direction matrix.

struct TtcVars {
  Var r_sm, r_sp, r_ttc;
};
struct AtcVars {
  Var s_w, s_b, r_atc;
};

/// Rows k = 1..n-1 minus rows 0..n-2.
Var directions(Var features);
/// Angles between consecutive directions; a zero direction gives angle 0.
/// Fewer than four directions give zeros.
TtcVars r_ttc(Var dirs);
/// Runs of equal consecutive categories form the groups.
AtcVars r_atc(Var dirs, const std::vector<int>& categories);

}  // namespace firp::objective
