#include "firp/plan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "firp/errors.hpp"

namespace firp::plan {

using world::Action;
using world::ActionCategory;

namespace {

void validate(const world::TaskSpec& spec, const PlanParams& params) {
  spec.validate();
  std::vector<int> sorted = params.order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expected(static_cast<std::size_t>(spec.blocks));
  std::iota(expected.begin(), expected.end(), 0);
  if (sorted != expected) throw ConfigError("plan: order must be a permutation of the block indices");
  if (params.noise < 0) throw ConfigError("plan: waypoint noise must be non-negative");
  int per_block = 0;
  for (int s : params.phase_steps) {
    if (s < 1) throw ConfigError("plan: every phase needs at least one step");
    per_block += s;
  }
  if (per_block != spec.horizon / spec.blocks) {
    throw ConfigError("plan: phase steps sum to " + std::to_string(per_block) + " but horizon " +
                      std::to_string(spec.horizon) + " over " + std::to_string(spec.blocks) +
                      " blocks allows " + std::to_string(spec.horizon / spec.blocks));
  }
}

// Emits `steps` straight-line moves from the tracked gripper position toward
// the target, each clamped to the step limit.
void move_to(std::vector<Action>& out, double& gx, double& gy, double tx, double ty, int steps,
             ActionCategory category, int grip, double max_step) {
  for (int k = 0; k < steps; ++k) {
    const int remaining = steps - k;
    const double dx = std::clamp((tx - gx) / remaining, -max_step, max_step);
    const double dy = std::clamp((ty - gy) / remaining, -max_step, max_step);
    const double nx = std::clamp(gx + dx, 0.0, 1.0);
    const double ny = std::clamp(gy + dy, 0.0, 1.0);
    out.push_back(Action{category, nx - gx, ny - gy, grip});
    gx = nx;
    gy = ny;
  }
}

}  // namespace

std::array<int, 7> default_phase_steps(int per_block) {
  if (per_block < 7) throw ConfigError("plan: at least 7 steps per block are required");
  constexpr std::array<double, 7> share = {0.25, 0.05, 0.10, 0.35, 0.10, 0.05, 0.10};
  std::array<int, 7> steps{};
  int total = 0;
  for (std::size_t i = 0; i < share.size(); ++i) {
    steps[i] = std::max(1, static_cast<int>(std::lround(share[i] * per_block)));
    total += steps[i];
  }
  steps[3] += per_block - total;
  // Keep the Move phase positive by borrowing from the largest other phase.
  while (steps[3] < 1) {
    auto it = std::max_element(steps.begin(), steps.end());
    --*it;
    ++steps[3];
  }
  return steps;
}

PlanParams PlanParams::defaults(const world::TaskSpec& spec, double noise, std::uint64_t seed) {
  PlanParams p;
  p.order.resize(static_cast<std::size_t>(spec.blocks));
  std::iota(p.order.begin(), p.order.end(), 0);
  p.noise = noise;
  p.phase_steps = default_phase_steps(spec.horizon / spec.blocks);
  p.seed = seed;
  return p;
}

std::vector<Action> make_plan(const world::WorldState& initial, const world::TaskSpec& spec,
                              const PlanParams& params) {
  validate(spec, params);
  if (initial.blocks.size() != static_cast<std::size_t>(spec.blocks)) {
    throw ConfigError("plan: world block count differs from the task");
  }
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double w = spec.block_width;
  const double h = spec.half_height();
  const auto& st = params.phase_steps;

  std::vector<Action> out;
  out.reserve(static_cast<std::size_t>(spec.horizon));
  double gx = initial.grip_x;
  double gy = initial.grip_y;
  for (std::size_t slot = 0; slot < params.order.size(); ++slot) {
    const world::Block& block = initial.blocks[static_cast<std::size_t>(params.order[slot])];
    const double grasp_noise = params.noise * normal(rng);
    const double place_noise = params.noise * normal(rng);

    double place_x = spec.base_x;
    double place_y = h + w * static_cast<double>(slot);
    if (spec.kind == world::TaskKind::Replacement) {
      const double pitch = spec.target.width() / static_cast<double>(spec.blocks);
      place_x = spec.target.lo + pitch * (static_cast<double>(slot) + 0.5);
      place_y = h;
    }
    const double grasp_x = block.x + grasp_noise;
    const double grasp_y = block.y;
    const double target_x = place_x + place_noise;
    const double carry_y = place_y + w;

    move_to(out, gx, gy, grasp_x, grasp_y, st[0], ActionCategory::MoveBeforeGrasp, 0, spec.max_step);
    move_to(out, gx, gy, gx, gy, st[1], ActionCategory::Grasp, 1, spec.max_step);
    move_to(out, gx, gy, gx, std::max(gy, carry_y), st[2], ActionCategory::Hold, 0, spec.max_step);
    move_to(out, gx, gy, target_x, carry_y, st[3], ActionCategory::Move, 0, spec.max_step);
    move_to(out, gx, gy, target_x, place_y, st[4], ActionCategory::HoldBeforeRelease, 0, spec.max_step);
    move_to(out, gx, gy, gx, gy, st[5], ActionCategory::Release, 0, spec.max_step);
    move_to(out, gx, gy, gx, place_y + w, st[6], ActionCategory::MoveAfterRelease, 0, spec.max_step);
  }
  while (static_cast<int>(out.size()) < spec.horizon) out.push_back(Action{ActionCategory::Hold, 0, 0, 0});
  return out;
}

PlanParams reorder(const PlanParams& params) {
  PlanParams next = params;
  std::next_permutation(next.order.begin(), next.order.end());
  return next;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over a combined state.
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<world::Episode> generate_episodes(const world::TaskSpec& spec, int n, double noise, std::uint64_t seed) {
  if (n < 0) throw ConfigError("episode count must be non-negative");
  std::vector<world::Episode> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    const world::WorldState initial = world::reset(spec, s);
    std::mt19937_64 rng(s);
    PlanParams params = PlanParams::defaults(spec, noise, rng());
    std::shuffle(params.order.begin(), params.order.end(), rng);
    out.push_back(world::simulate(initial, make_plan(initial, spec, params), spec, s));
  }
  return out;
}

}  // namespace firp::plan
