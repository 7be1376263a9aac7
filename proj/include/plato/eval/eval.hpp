#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "plato/models/models.hpp"
#include "plato/primitives/primitives.hpp"
#include "plato/sim/world.hpp"

namespace plato::eval {

using primitives::PrimitiveKind;

struct SuccessMetric {
  double eps_pos = 0.15;                  ///< 1.5 x ego radius
  double eps_rot = 15.0 * 3.14159265358979323846 / 180.0;
  double min_progress = 0.5;
  int max_steps = 60;                     ///< 3 x H_int

  static SuccessMetric for_config(const sim::WorldConfig& w, int H_int = 20);
  void validate() const;
};

/// A goal made by running the scripted primitive, plus the world to reset to.
struct GoalSpec {
  sim::WorldSnapshot snapshot;
  Eigen::VectorXd goal_object;  ///< o_g, the object part of the observation at Done
  primitives::PrimitiveSpec spec;
  sim::BlockState start_block;
  sim::BlockState goal_block;
  int reference_steps = 0;
};

/// Snapshots `world`, runs a sampled `kind` primitive to Done (at most
/// max_reference_steps), records o_g and restores the world. Returns nullopt when
/// the kind is infeasible here or the reference never finishes.
std::optional<GoalSpec> make_goal(sim::World& world, PrimitiveKind kind, Rng& rng, int max_reference_steps = 150);

/// Goal for eval episode `index` of `kind`: fresh worlds from derived seeds until one is feasible.
/// `skipped` counts rejected worlds.
GoalSpec episode_goal(const sim::WorldConfig& cfg, PrimitiveKind kind, std::uint64_t eval_seed, int index,
                      int* skipped = nullptr);

bool is_success(const GoalSpec& goal, const sim::BlockState& current, const SuccessMetric& m);

struct EvalResult {
  PrimitiveKind primitive = PrimitiveKind::kPushL;
  bool success = false;
  int steps_used = 0;
  double pos_error = 0.0;
  double angle_error = 0.0;  ///< radians, wrapped
};

/// Observation-only policy; it never sees the reference spec.
using ObsPolicy = std::function<sim::Action(const Eigen::VectorXd& obs)>;

/// Resets to the goal snapshot and rolls out until first success or max_steps.
EvalResult run_episode(const ObsPolicy& policy, const GoalSpec& goal, const SuccessMetric& m);
EvalResult run_episode(models::Bundle& bundle, const GoalSpec& goal, const SuccessMetric& m, std::uint64_t noise_seed);
/// Replays the scripted primitive with fresh action noise (metric coherence check).
EvalResult run_scripted_episode(const GoalSpec& goal, const SuccessMetric& m);

// ---- tables ----

struct ResultRow {
  std::string method;
  PrimitiveKind primitive = PrimitiveKind::kPushL;
  int seed = 0;
  int episode = 0;
  bool success = false;
  int steps = 0;
};

struct TableCell {
  std::string method;
  PrimitiveKind primitive = PrimitiveKind::kPushL;
  double mean = 0.0;     ///< percent
  double std_err = 0.0;  ///< percent, across seeds
  int seeds = 0;
};

struct SuccessTable {
  std::vector<std::string> methods;
  std::vector<PrimitiveKind> primitives;
  std::vector<TableCell> cells;
  /// method/seed pairs whose checkpoint was missing.
  std::vector<std::string> absent;

  const TableCell* find(const std::string& method, PrimitiveKind k) const;
  /// Mean of the per-primitive means for a method.
  double average(const std::string& method) const;
};

/// Per seed success rate, then mean and standard error across seeds.
SuccessTable aggregate(const std::vector<ResultRow>& rows);

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out);
std::vector<ResultRow> read_results_csv(std::istream& in);
/// Aligned "mean(std-err)" grid, one row per method plus an average column.
void write_table(const SuccessTable& t, std::ostream& out);

struct CheckpointEntry {
  std::string method;
  int seed = 0;
  std::string path;
};

struct EvaluateOptions {
  std::vector<PrimitiveKind> primitives;
  int n_episodes = 100;
  std::uint64_t eval_seed = 0;
  SuccessMetric metric;
  int jobs = 1;
};

/// Evaluates every checkpoint on the same goal set. Missing files land in `absent`.
SuccessTable evaluate(const std::vector<CheckpointEntry>& entries, const sim::WorldConfig& world,
                      const EvaluateOptions& opt, std::vector<ResultRow>* rows = nullptr);

/// Rows of results for one loaded bundle.
std::vector<ResultRow> evaluate_bundle(models::Bundle& bundle, const std::string& method, int seed,
                                       const sim::WorldConfig& world, const EvaluateOptions& opt);

// ---- latents ----

struct LatentRow {
  PrimitiveKind label;
  Eigen::VectorXd z;
};

/// z' drawn by the prior at the start of each eval episode.
std::vector<LatentRow> export_latents(models::Bundle& bundle, const sim::WorldConfig& world,
                                      const EvaluateOptions& opt);
void write_latents_csv(const std::vector<LatentRow>& rows, std::ostream& out);

}  // namespace plato::eval
