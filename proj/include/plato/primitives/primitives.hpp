#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "plato/common/rng.hpp"
#include "plato/sim/world.hpp"

namespace plato::primitives {

using sim::Range;
using sim::Vec2;

enum class PrimitiveKind { kPushL = 0, kPushR, kPullL, kPullR, kLift, kTip, kSideRotate };

inline constexpr int kNumKinds = 7;
inline constexpr std::array<PrimitiveKind, kNumKinds> kAllKinds{
    PrimitiveKind::kPushL, PrimitiveKind::kPushR, PrimitiveKind::kPullL, PrimitiveKind::kPullR,
    PrimitiveKind::kLift,  PrimitiveKind::kTip,   PrimitiveKind::kSideRotate};

std::string_view to_string(PrimitiveKind k);
/// Throws ConfigError on unknown names.
PrimitiveKind kind_from_string(std::string_view name);

/// Sampling ranges for primitive parameters. Fractions are relative to the arena size.
struct PrimitiveRanges {
  Range push_distance_frac{0.15, 0.45};
  Range lift_height_frac{0.2, 0.5};
  Range rotate_angle_deg{30.0, 120.0};
  Range speed_scale{0.5, 1.5};
  Range jitter_std{0.0, 0.06};
  Range approach_offset{0.0, 0.05};
  double action_noise_frac = 0.01;
  int dwell_min = 2;
  int dwell_max = 6;
  int stall_timeout = 12;
};

void to_json(nlohmann::json& j, const PrimitiveRanges& r);
void from_json(const nlohmann::json& j, PrimitiveRanges& r);

using KindWeights = std::array<double, kNumKinds>;

inline KindWeights uniform_weights() {
  KindWeights w;
  w.fill(1.0 / kNumKinds);
  return w;
}

/// Weights uniform over `kinds`, zero elsewhere.
KindWeights weights_over(const std::vector<PrimitiveKind>& kinds);

/// Fully determines a scripted controller given the world it starts in.
struct PrimitiveSpec {
  PrimitiveKind kind = PrimitiveKind::kLift;
  int target_block = 0;
  Vec2 approach_offset = Vec2::Zero();
  /// Push/pull distance, lift height, or signed rotation angle (radians, CCW positive).
  double magnitude = 0.0;
  /// Tip direction: +1 topples toward +x, -1 toward -x. Unused by other kinds.
  int direction = 1;
  double speed_scale = 1.0;
  double jitter_std = 0.0;
  double noise_std = 0.0;
  int dwell_steps = 2;
  int stall_timeout = 12;
  /// Seeds waypoint jitter and per-step action noise.
  std::uint64_t noise_seed = 0;
};

enum class ScriptPhase { kApproach = 0, kEngage, kManipulate, kRetreat, kDone };

std::string_view to_string(ScriptPhase p);

/// Horizontal sign of the motion a kind produces (+1 right, -1 left, 0 none).
int motion_sign(const PrimitiveSpec& spec);

/// Geometric feasibility of a spec in the given world (room for the motion).
bool feasible(const PrimitiveSpec& spec, const sim::World& world);

/// Draws a kind from `weights` and its parameters from `ranges`. Infeasible
/// draws flip direction first, then re-draw the magnitude, then fall back to Lift.
PrimitiveSpec sample_primitive(Rng& rng, const sim::World& world, const KindWeights& weights,
                               const PrimitiveRanges& ranges = {});

struct PolicyOutput {
  sim::Action action;
  ScriptPhase phase = ScriptPhase::kApproach;
};

/// Phase-machine controller executing one primitive with waypoint servoing.
class PrimitiveController {
 public:
  PrimitiveController(const PrimitiveSpec& spec, const sim::WorldConfig& config);

  /// Action for the current world state; advances the phase machine.
  PolicyOutput step(const sim::World& world);

  ScriptPhase phase() const { return phase_; }
  const PrimitiveSpec& spec() const { return spec_; }
  int steps_taken() const { return steps_; }

 private:
  void plan_approach(const sim::World& world);
  void enter(ScriptPhase p);
  Vec2 advance_carrot(const Vec2& goal, double speed);
  void stall_check(const sim::World& world);

  PrimitiveSpec spec_;
  sim::WorldConfig cfg_;
  Rng noise_;
  ScriptPhase phase_ = ScriptPhase::kApproach;
  int phase_steps_ = 0;
  int steps_ = 0;
  bool settled_ = false;
  bool grab_ = false;
  // Push with no room behind the block: it is dragged from the top instead.
  bool nudging_ = false;

  Vec2 carrot_ = Vec2::Zero();
  std::vector<Vec2> waypoints_;
  std::size_t waypoint_ = 0;

  // Captured when manipulation starts.
  Vec2 manip_start_ = Vec2::Zero();
  Vec2 block_start_ = Vec2::Zero();
  Vec2 pivot_ = Vec2::Zero();
  Vec2 pivot_local_ = Vec2::Zero();
  double start_angle_ = 0.0;
  double swept_ = 0.0;
  double rotate_target_ = 0.0;
  int dwell_left_ = 0;
  bool reached_ = false;

  int no_progress_ = 0;
  Vec2 last_target_ = Vec2::Zero();
};

/// Did the primitive reach its intent? Compares the target block before and after.
/// `max_rise` is the largest upward displacement seen during execution (Lift).
bool primitive_achieved(const PrimitiveSpec& spec, const sim::BlockState& before, const sim::BlockState& after,
                        double max_rise);

/// One labelled primitive execution inside a play episode.
struct PrimitiveLabel {
  PrimitiveKind kind;
  std::int64_t start_step;
  std::int64_t end_step;
};

}  // namespace plato::primitives
