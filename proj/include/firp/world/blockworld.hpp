#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "firp/diff/tensor.hpp"

namespace firp::world {

using diff::Vector;

enum class TaskKind { Replacement, Stacking };

std::string to_string(TaskKind kind);
/// Throws ConfigError on an unknown name.
TaskKind task_kind_from_string(const std::string& name);

enum class ActionCategory : int {
  Move = 0,
  Grasp = 1,
  Release = 2,
  Hold = 3,
  MoveBeforeGrasp = 4,
  HoldBeforeRelease = 5,
  MoveAfterRelease = 6,
};

inline constexpr int kCategoryCount = 7;
/// One-hot category followed by (dx, dy, grip).
inline constexpr int kActionDim = kCategoryCount + 3;

/// Closed interval on the horizontal axis.
struct Interval {
  double lo = 0;
  double hi = 0;
  bool contains(double x, double eps = 1e-9) const { return x >= lo - eps && x <= hi + eps; }
  double width() const { return hi - lo; }
};

/// Task geometry and tolerances. Defaults come from stacking() / replacement().
struct TaskSpec {
  TaskKind kind = TaskKind::Stacking;
  int blocks = 3;
  /// Plan length in steps.
  int horizon = 28;
  double block_width = 0.08;
  double r_grasp = 0.05;
  /// Fraction of the support half-width a block may overhang before it tumbles.
  double r_stable = 0.5;
  double r_col = 0.06;
  double push_dist = 0.05;
  double max_step = 0.12;
  double gripper_x = 0.5;
  double gripper_y = 0.2;
  /// Replacement: box the blocks start in / must end in.
  Interval source{0.18, 0.42};
  Interval target{0.58, 0.82};
  /// Stacking: tower base, allowed bottom offset, floor spawn range and the
  /// half-width around the base kept clear at reset.
  double base_x = 0.5;
  double base_tol = 0.04;
  Interval spawn{0.26, 0.74};
  double keep_out = 0.12;

  static TaskSpec stacking();
  static TaskSpec replacement();

  /// Throws ConfigError when a tolerance is non-positive or K < 1.
  void validate() const;
  double half_height() const { return block_width / 2; }
};

struct Action {
  ActionCategory category = ActionCategory::Hold;
  double dx = 0;
  double dy = 0;
  int grip = 0;

  Vector to_vector() const;
  /// Throws DimensionError / DomainError if the vector is not a valid action.
  static Action from_vector(const Vector& v);
};

struct Block {
  double x = 0;
  double y = 0;
  double width = 0.08;
  bool attached = false;
  bool operator==(const Block&) const = default;
};

struct WorldState {
  double grip_x = 0.5;
  double grip_y = 0.3;
  bool grip_closed = false;
  std::vector<Block> blocks;
  /// Offset of the attached block from the gripper.
  double attach_dx = 0;
  double attach_dy = 0;
  TaskKind kind = TaskKind::Stacking;

  int attached_index() const;
  bool operator==(const WorldState&) const = default;
};

struct Episode {
  TaskKind task = TaskKind::Stacking;
  std::uint64_t seed = 0;
  std::vector<Action> actions;
  /// observations[t] is the state after the first t actions; size T.
  std::vector<Vector> observations;
  bool label = false;

  int horizon() const { return static_cast<int>(actions.size()); }
  const Vector& initial_observation() const { return observations.front(); }
  /// T x kActionDim matrix of action vectors.
  diff::Matrix action_matrix() const;
};

/// Blocks at rest and non-overlapping, drawn from `seed`. Throws ConfigError
/// when K blocks cannot be placed.
WorldState reset(const TaskSpec& spec, std::uint64_t seed);

WorldState step(const WorldState& state, const Action& action, const TaskSpec& spec);

/// [grip_x, grip_y, grip_closed, b1x, b1y, ..., bKx, bKy].
Vector observe(const WorldState& state);
int observation_dim(const TaskSpec& spec);

bool evaluate_success(const WorldState& state, const TaskSpec& spec);

/// Executes all actions; the label is evaluated on the state after the last one.
/// Throws ConfigError on an empty action list.
Episode simulate(const WorldState& initial, const std::vector<Action>& actions, const TaskSpec& spec,
                 std::uint64_t seed = 0);

/// Final state after executing `actions` from `initial`.
WorldState execute(const WorldState& initial, const std::vector<Action>& actions, const TaskSpec& spec);

/// True iff every unattached block rests on the floor or on another block.
bool supported(const WorldState& state, const TaskSpec& spec);

}  // namespace firp::world
