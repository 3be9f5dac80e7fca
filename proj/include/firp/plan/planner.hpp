#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "firp/world/blockworld.hpp"

namespace firp::plan {

/// Phase order emitted for every block.
inline constexpr std::array<world::ActionCategory, 7> kPhaseOrder = {
    world::ActionCategory::MoveBeforeGrasp, world::ActionCategory::Grasp,
    world::ActionCategory::Hold,            world::ActionCategory::Move,
    world::ActionCategory::HoldBeforeRelease, world::ActionCategory::Release,
    world::ActionCategory::MoveAfterRelease};

struct PlanParams {
  /// Permutation of 0..K-1; the first entry is moved first.
  std::vector<int> order;
  /// Standard deviation of the horizontal waypoint perturbation.
  double noise = 0.0;
  /// Steps per phase (kPhaseOrder), per block.
  std::array<int, 7> phase_steps{2, 1, 1, 2, 1, 1, 1};
  std::uint64_t seed = 0;

  /// Identity order and the default phase split of floor(T / K) steps.
  static PlanParams defaults(const world::TaskSpec& spec, double noise = 0.0, std::uint64_t seed = 0);
};

/// Splits `per_block` steps 25/5/10/35/10/5/10 % over the phases, each at
/// least one step, with the rounding remainder given to the Move phase.
/// Throws ConfigError if per_block < 7.
std::array<int, 7> default_phase_steps(int per_block);

/// Scripted pick-and-place plan of exactly spec.horizon actions. The K
/// block sequences take K * sum(phase_steps) steps; the horizon may exceed
/// that by fewer than K steps, which are filled with trailing Hold actions.
/// Throws ConfigError on an invalid order or a step budget that does not
/// match the horizon.
std::vector<world::Action> make_plan(const world::WorldState& initial, const world::TaskSpec& spec,
                                     const PlanParams& params);

/// Next permutation in lexicographic order, wrapping to the first after K!.
PlanParams reorder(const PlanParams& params);

/// Deterministic 64-bit mix of (seed, index) used to derive per-item seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// `n` labelled episodes. Episode i resets the world from
/// derive_seed(seed, i), draws a uniformly random block order and a
/// waypoint-noise seed from that same stream, then plans and simulates.
std::vector<world::Episode> generate_episodes(const world::TaskSpec& spec, int n, double noise, std::uint64_t seed);

}  // namespace firp::plan
