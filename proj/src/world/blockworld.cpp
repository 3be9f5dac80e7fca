#include "firp/world/blockworld.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "firp/errors.hpp"

namespace firp::world {
namespace {

constexpr double kEps = 1e-9;
constexpr int kMaxResetAttempts = 10000;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void clamp_block(Block& b) {
  const double h = b.width / 2;
  b.x = std::clamp(b.x, h, 1.0 - h);
  b.y = std::clamp(b.y, h, 1.0 - h);
}

// Distance from point p to the segment a-b.
double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax;
  const double vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double s = 0;
  if (len2 > 0) s = std::clamp(((px - ax) * vx + (py - ay) * vy) / len2, 0.0, 1.0);
  const double cx = ax + s * vx - px;
  const double cy = ay + s * vy - py;
  return std::sqrt(cx * cx + cy * cy);
}

bool same_level(const Block& a, const Block& b) { return std::abs(a.y - b.y) < a.width / 2; }

// Moves block i horizontally by `delta`, stopping at contact with a free
// block on the same level.
void push_block(WorldState& s, std::size_t i, double delta) {
  Block& b = s.blocks[i];
  double target = b.x + delta;
  for (std::size_t j = 0; j < s.blocks.size(); ++j) {
    if (j == i || s.blocks[j].attached || !same_level(b, s.blocks[j])) continue;
    const Block& o = s.blocks[j];
    const double gap = (b.width + o.width) / 2;
    if (delta > 0 && o.x >= b.x) target = std::min(target, o.x - gap);
    if (delta < 0 && o.x <= b.x) target = std::max(target, o.x + gap);
  }
  if ((delta > 0 && target > b.x) || (delta < 0 && target < b.x)) b.x = target;
  clamp_block(b);
}

// Drops every free block onto its first support, tumbling blocks that
// overhang their support by more than the stability fraction.
void settle(WorldState& s, const TaskSpec& spec) {
  const std::size_t n = s.blocks.size();
  const double limit = spec.r_stable * spec.block_width / 2;
  for (int pass = 0; pass < 8 * static_cast<int>(n) + 8; ++pass) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s.blocks[a].y < s.blocks[b].y; });
    bool moved = false;
    std::vector<bool> placed(n, false);
    for (std::size_t i : order) {
      Block& b = s.blocks[i];
      if (b.attached) continue;
      int support = -1;
      for (std::size_t j = 0; j < n; ++j) {
        if (!placed[j] || s.blocks[j].attached) continue;
        const Block& o = s.blocks[j];
        if (std::abs(o.x - b.x) < (o.width + b.width) / 2 - kEps && o.y < b.y + kEps) {
          if (support < 0 || o.y > s.blocks[support].y) support = static_cast<int>(j);
        }
      }
      const double rest = support < 0 ? b.width / 2 : s.blocks[support].y + (s.blocks[support].width + b.width) / 2;
      if (std::abs(b.y - rest) > 0) {
        b.y = rest;
      }
      placed[i] = true;
      if (support >= 0) {
        const Block& o = s.blocks[support];
        const double off = b.x - o.x;
        if (std::abs(off) > limit + kEps) {
          // Tumble off the nearer edge and fall again from this height.
          b.x = o.x + (off > 0 ? 1.0 : -1.0) * (o.width + b.width) / 2;
          clamp_block(b);
          moved = true;
          break;
        }
      }
    }
    if (!moved) return;
  }
}

}  // namespace

std::string to_string(TaskKind kind) { return kind == TaskKind::Stacking ? "stacking" : "replacement"; }

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "stacking") return TaskKind::Stacking;
  if (name == "replacement") return TaskKind::Replacement;
  throw ConfigError("unknown task kind: " + name);
}

TaskSpec TaskSpec::stacking() { return TaskSpec{}; }

TaskSpec TaskSpec::replacement() {
  TaskSpec s;
  s.kind = TaskKind::Replacement;
  s.horizon = 48;
  s.max_step = 0.15;
  return s;
}

void TaskSpec::validate() const {
  if (blocks < 1) throw ConfigError("task: block count must be at least 1");
  if (horizon < 1) throw ConfigError("task: horizon must be positive");
  const std::pair<const char*, double> positive[] = {
      {"block_width", block_width}, {"r_grasp", r_grasp}, {"r_stable", r_stable}, {"r_col", r_col},
      {"push_dist", push_dist},     {"max_step", max_step}, {"base_tol", base_tol}};
  for (const auto& [name, v] : positive) {
    if (!(v > 0)) throw ConfigError(std::string("task: ") + name + " must be positive");
  }
  if (source.width() < 0 || target.width() < 0 || spawn.width() < 0) {
    throw ConfigError("task: intervals must have lo <= hi");
  }
}

Vector Action::to_vector() const {
  Vector v = Vector::Zero(kActionDim);
  v(static_cast<int>(category)) = 1.0;
  v(kCategoryCount) = dx;
  v(kCategoryCount + 1) = dy;
  v(kCategoryCount + 2) = grip;
  return v;
}

Action Action::from_vector(const Vector& v) {
  if (v.size() != kActionDim) throw DimensionError("action vector must have 10 entries");
  int active = -1;
  for (int c = 0; c < kCategoryCount; ++c) {
    if (v(c) == 1.0) {
      if (active >= 0) throw DomainError("action vector has more than one active category");
      active = c;
    } else if (v(c) != 0.0) {
      throw DomainError("action category entries must be 0 or 1");
    }
  }
  if (active < 0) throw DomainError("action vector has no active category");
  const double grip = v(kCategoryCount + 2);
  if (grip != 0.0 && grip != 1.0) throw DomainError("grip signal must be 0 or 1");
  return Action{static_cast<ActionCategory>(active), v(kCategoryCount), v(kCategoryCount + 1),
                static_cast<int>(grip)};
}

int WorldState::attached_index() const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].attached) return static_cast<int>(i);
  }
  return -1;
}

diff::Matrix Episode::action_matrix() const {
  diff::Matrix m(static_cast<Eigen::Index>(actions.size()), kActionDim);
  for (std::size_t t = 0; t < actions.size(); ++t) m.row(static_cast<Eigen::Index>(t)) = actions[t].to_vector();
  return m;
}

WorldState reset(const TaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const Interval range = spec.kind == TaskKind::Stacking ? spec.spawn : spec.source;
  std::uniform_real_distribution<double> ux(range.lo, range.hi);
  WorldState s;
  s.kind = spec.kind;
  s.grip_x = spec.gripper_x;
  s.grip_y = spec.gripper_y;
  const double h = spec.half_height();
  for (int attempt = 0; attempt < kMaxResetAttempts; ++attempt) {
    std::vector<Block> blocks;
    bool ok = true;
    for (int k = 0; k < spec.blocks && ok; ++k) {
      const double x = ux(rng);
      if (spec.kind == TaskKind::Stacking && std::abs(x - spec.base_x) < spec.keep_out) {
        ok = false;
        break;
      }
      for (const Block& b : blocks) {
        if (std::abs(b.x - x) < spec.block_width) ok = false;
      }
      blocks.push_back(Block{x, h, spec.block_width, false});
    }
    if (ok) {
      s.blocks = std::move(blocks);
      return s;
    }
  }
  throw ConfigError("reset: cannot place " + std::to_string(spec.blocks) + " non-overlapping blocks");
}

WorldState step(const WorldState& state, const Action& action, const TaskSpec& spec) {
  WorldState s = state;
  const double dx = std::clamp(action.dx, -spec.max_step, spec.max_step);
  const double dy = std::clamp(action.dy, -spec.max_step, spec.max_step);
  const double x0 = s.grip_x;
  const double y0 = s.grip_y;
  s.grip_x = clamp01(s.grip_x + dx);
  s.grip_y = clamp01(s.grip_y + dy);
  const double mx = s.grip_x - x0;

  const int held = s.attached_index();
  double cx0 = 0;
  double cy0 = 0;
  if (held >= 0) {
    Block& b = s.blocks[held];
    cx0 = b.x;
    cy0 = b.y;
    b.x = s.grip_x + s.attach_dx;
    b.y = s.grip_y + s.attach_dy;
    clamp_block(b);
  }

  // Sweeps push free blocks along the horizontal motion direction. Blocks
  // the gripper arrives at (within r_col of its new position) are not pushed.
  if (mx != 0) {
    const double delta = mx > 0 ? spec.push_dist : -spec.push_dist;
    std::vector<std::size_t> hit;
    for (std::size_t i = 0; i < s.blocks.size(); ++i) {
      const Block& b = s.blocks[i];
      if (b.attached) continue;
      const double arrive = std::hypot(b.x - s.grip_x, b.y - s.grip_y);
      bool touched = arrive > spec.r_col && segment_distance(b.x, b.y, x0, y0, s.grip_x, s.grip_y) <= spec.r_col;
      if (held >= 0) {
        const Block& c = s.blocks[held];
        touched = touched || segment_distance(b.x, b.y, cx0, cy0, c.x, c.y) <= spec.r_col;
      }
      if (touched) hit.push_back(i);
    }
    // Push the leading block first so contact stops behave consistently.
    std::sort(hit.begin(), hit.end(), [&](std::size_t a, std::size_t b) {
      return delta > 0 ? s.blocks[a].x > s.blocks[b].x : s.blocks[a].x < s.blocks[b].x;
    });
    for (std::size_t i : hit) push_block(s, i, delta);
  }

  if (action.category == ActionCategory::Grasp && action.grip == 1 && held < 0) {
    s.grip_closed = true;
    int nearest = -1;
    double best = 0;
    for (std::size_t i = 0; i < s.blocks.size(); ++i) {
      const double d = std::hypot(s.blocks[i].x - s.grip_x, s.blocks[i].y - s.grip_y);
      if (d <= spec.r_grasp + kEps && (nearest < 0 || d < best)) {
        nearest = static_cast<int>(i);
        best = d;
      }
    }
    if (nearest >= 0) {
      s.blocks[nearest].attached = true;
      s.attach_dx = s.blocks[nearest].x - s.grip_x;
      s.attach_dy = s.blocks[nearest].y - s.grip_y;
    }
  } else if (action.category == ActionCategory::Release) {
    s.grip_closed = false;
    if (held >= 0) s.blocks[held].attached = false;
    s.attach_dx = 0;
    s.attach_dy = 0;
  }

  settle(s, spec);
  return s;
}

Vector observe(const WorldState& state) {
  Vector v(3 + 2 * static_cast<Eigen::Index>(state.blocks.size()));
  v(0) = state.grip_x;
  v(1) = state.grip_y;
  v(2) = state.grip_closed ? 1.0 : 0.0;
  for (std::size_t k = 0; k < state.blocks.size(); ++k) {
    v(3 + 2 * static_cast<Eigen::Index>(k)) = state.blocks[k].x;
    v(4 + 2 * static_cast<Eigen::Index>(k)) = state.blocks[k].y;
  }
  return v;
}

int observation_dim(const TaskSpec& spec) { return 3 + 2 * spec.blocks; }

bool supported(const WorldState& state, const TaskSpec& spec) {
  for (std::size_t i = 0; i < state.blocks.size(); ++i) {
    const Block& b = state.blocks[i];
    if (b.attached) continue;
    if (std::abs(b.y - b.width / 2) <= kEps) continue;
    bool ok = false;
    for (std::size_t j = 0; j < state.blocks.size() && !ok; ++j) {
      const Block& o = state.blocks[j];
      if (j == i || o.attached) continue;
      ok = std::abs(o.x - b.x) < (o.width + b.width) / 2 &&
           std::abs(b.y - (o.y + (o.width + b.width) / 2)) <= kEps;
    }
    if (!ok) return false;
  }
  (void)spec;
  return true;
}

bool evaluate_success(const WorldState& state, const TaskSpec& spec) {
  if (state.attached_index() >= 0) return false;
  if (spec.kind == TaskKind::Replacement) {
    for (const Block& b : state.blocks) {
      if (!spec.target.contains(b.x)) return false;
    }
    return supported(state, spec);
  }
  std::vector<Block> tower = state.blocks;
  std::sort(tower.begin(), tower.end(), [](const Block& a, const Block& b) { return a.y < b.y; });
  const double limit = spec.r_stable * spec.block_width / 2;
  double expected = 0;
  for (std::size_t k = 0; k < tower.size(); ++k) {
    const Block& b = tower[k];
    expected = k == 0 ? b.width / 2 : expected + (tower[k - 1].width + b.width) / 2;
    if (std::abs(b.y - expected) > kEps) return false;
    if (k == 0) {
      if (std::abs(b.x - spec.base_x) > spec.base_tol + kEps) return false;
    } else if (std::abs(b.x - tower[k - 1].x) > limit + kEps) {
      return false;
    }
  }
  return true;
}

WorldState execute(const WorldState& initial, const std::vector<Action>& actions, const TaskSpec& spec) {
  WorldState s = initial;
  for (const Action& a : actions) s = step(s, a, spec);
  return s;
}

Episode simulate(const WorldState& initial, const std::vector<Action>& actions, const TaskSpec& spec,
                 std::uint64_t seed) {
  if (actions.empty()) throw ConfigError("simulate: empty action list");
  Episode ep;
  ep.task = spec.kind;
  ep.seed = seed;
  ep.actions = actions;
  ep.observations.reserve(actions.size());
  WorldState s = initial;
  for (const Action& a : actions) {
    ep.observations.push_back(observe(s));
    s = step(s, a, spec);
  }
  ep.label = evaluate_success(s, spec);
  return ep;
}

}  // namespace firp::world
