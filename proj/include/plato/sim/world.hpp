#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "plato/common/rng.hpp"

namespace plato::sim {

using Vec2 = Eigen::Vector2d;

struct Range {
  double min = 0.0;
  double max = 0.0;
};

/// Static parameters of a 2D block world. Lengths are arena units, time in seconds.
struct WorldConfig {
  double arena_width = 4.0;
  double arena_height = 3.0;
  double gravity = 9.81;
  double dt = 1.0 / 240.0;
  double control_rate = 10.0;
  double grab_radius = 0.08;
  double ego_radius = 0.1;
  double ego_max_speed = 2.0;
  double friction_coeff = 0.6;
  double restitution = 0.0;
  int n_blocks = 1;
  Range block_size_range{0.15, 0.25};
  Range block_mass_range{0.5, 2.0};
  double obs_noise_std = 0.0;

  // Solver and contact tolerances.
  int solver_iterations = 12;
  double baumgarte = 0.2;
  double penetration_slop = 0.002;
  double penetration_tolerance = 0.01;
  double contact_epsilon = 0.01;
  double speculative_margin = 0.02;
  double ego_solver_mass = 100.0;
  double tether_damping = 3.0;  ///< 1/s, joint friction on a held block's swing and spin

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  int substeps_per_control() const;
  double control_dt() const { return substeps_per_control() * dt; }

  /// FNV-1a hash of the canonical JSON serialization.
  std::string hash() const;
};

void to_json(nlohmann::json& j, const WorldConfig& c);
/// Strict: unknown keys raise ConfigError.
void from_json(const nlohmann::json& j, WorldConfig& c);

struct TetherAnchor {
  int block = 0;
  Vec2 local = Vec2::Zero();  ///< attachment point in the block frame
  double length = 0.0;        ///< rod length fixed at attach time

  friend bool operator==(const TetherAnchor&, const TetherAnchor&) = default;
};

struct EgoState {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  bool tether_active = false;
  std::optional<TetherAnchor> tether_anchor;

  friend bool operator==(const EgoState&, const EgoState&) = default;
};

struct BlockState {
  Vec2 position = Vec2::Zero();
  double angle = 0.0;
  Vec2 lin_velocity = Vec2::Zero();
  double ang_velocity = 0.0;
  Vec2 half_extents = Vec2::Constant(0.25);
  double mass = 1.0;

  /// Half extents of the world-axis-aligned bounding box.
  Vec2 aabb_half() const;
  Vec2 to_world(const Vec2& local) const;
  Vec2 to_local(const Vec2& world) const;
  double inertia() const { return mass * half_extents.squaredNorm() / 3.0; }

  friend bool operator==(const BlockState&, const BlockState&) = default;
};

struct Action {
  Vec2 target_position = Vec2::Zero();
  bool grab = false;
};

struct WorldState {
  EgoState ego;
  std::vector<BlockState> blocks;
  std::int64_t step_index = 0;
  bool contact = false;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// Field layout of observe(): robot part first, then one object record per block.
struct ObservationLayout {
  static constexpr int kRobotDim = 5;   // x, y, vx, vy, tether_active
  static constexpr int kBlockDim = 10;  // x, y, sin, cos, vx, vy, omega, half_w, half_h, mass
  int n_blocks = 1;

  int robot_dim() const { return kRobotDim; }
  int object_dim() const { return kBlockDim * n_blocks; }
  int total_dim() const { return robot_dim() + object_dim(); }
  /// Offset of block b's record inside the object part.
  int block_offset(int b) const { return kBlockDim * b; }
};

using StateVector = Eigen::VectorXd;

/// Opaque, versioned serialization of a World including its RNG.
struct WorldSnapshot {
  std::vector<std::uint8_t> bytes;
};

/// Deterministic block world: gravity, arena walls, randomized rectangular blocks,
/// and a velocity-controlled circular ego agent with a rigid tether.
class World {
 public:
  /// Samples a fresh world; identical (config, seed) give bit-identical worlds.
  World(const WorldConfig& config, std::uint64_t seed);

  /// Advances one control step (substeps_per_control physics substeps).
  /// Returns the contact flag for the resulting state.
  bool step(const Action& action);

  /// Flat state vector; pose fields carry Gaussian noise when obs_noise_std > 0.
  StateVector observe();
  /// Noise-free observation (does not touch the RNG).
  StateVector observe_clean() const;

  ObservationLayout layout() const { return ObservationLayout{config_.n_blocks}; }

  WorldSnapshot snapshot() const;
  static World restore(const WorldSnapshot& snapshot);

  const WorldState& state() const { return state_; }
  WorldState& mutable_state() { return state_; }
  const WorldConfig& config() const { return config_; }

  /// Surface-to-surface distance between the ego disc and block b (negative if overlapping).
  double ego_block_distance(int b) const;
  /// Index of the block whose surface is nearest to the ego.
  int nearest_block() const;

  friend bool operator==(const World& a, const World& b) {
    return a.state_ == b.state_ && a.rng_ == b.rng_;
  }

 private:
  World() = default;
  void substep(const Action& action, double time_left);
  void damp_tether(double dt);
  void project_into_arena();
  bool compute_contact() const;

  WorldConfig config_;
  WorldState state_;
  Rng rng_;
};

/// Closest point of block b's boundary to p, in world coordinates.
Vec2 closest_surface_point(const BlockState& b, const Vec2& p);

/// Wraps an angle difference into (-pi, pi].
double wrap_angle(double a);

}  // namespace plato::sim
