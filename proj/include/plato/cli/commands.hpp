#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "plato/cli/run_config.hpp"

namespace plato::cli {

// Each subcommand reports to `out` and throws the plato error types on failure;
// exit_code_for() maps them to process exit codes.

struct CollectArgs {
  std::string out;
  std::optional<std::uint64_t> seed;  ///< defaults to seeds.collect
  std::optional<int> episodes;        ///< defaults to config episodes
};
void collect(const RunConfig& cfg, const CollectArgs& a, std::ostream& out);

struct TrainArgs {
  std::string data;
  std::string out;
  std::optional<models::Variant> variant;
  std::optional<std::uint64_t> seed;
  std::string metrics;  ///< defaults to <out>.metrics.csv
  int progress_every = 1000;
};
void train(const RunConfig& cfg, const TrainArgs& a, std::ostream& out);

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string out_dir;  ///< results.csv, table.txt, table.json; empty = print only
  int jobs = 1;
  bool force = false;   ///< accept checkpoints trained on a different world config
};
eval::SuccessTable evaluate(const RunConfig& cfg, const EvalArgs& a, std::ostream& out);

struct SegmentStatsArgs {
  std::string data;
  std::string csv;
};
segment::SegmentStats segment_stats(const RunConfig& cfg, const SegmentStatsArgs& a, std::ostream& out);

struct AblateArgs {
  std::string data;
  std::string out_dir;
  double pct = 8.0;
  std::optional<std::uint64_t> seed;
  bool train = true;
};
segment::InjectionReport ablate_contact(const RunConfig& cfg, const AblateArgs& a, std::ostream& out);

struct ExportLatentsArgs {
  std::string checkpoint;
  std::string out;
  bool force = false;
};
void export_latents(const RunConfig& cfg, const ExportLatentsArgs& a, std::ostream& out);

struct ReplayArgs {
  std::string data;
  std::optional<int> episode;  ///< all episodes when absent
};
/// Re-simulates logged episodes and compares every state bit for bit. Throws DataError on divergence.
void replay(const ReplayArgs& a, std::ostream& out);

struct TeleopArgs {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;
  double render_hz = 20.0;
  std::optional<std::uint64_t> seed;
};
void teleop_serve(const RunConfig& cfg, const TeleopArgs& a, std::ostream& out);

/// 2 config/usage, 3 data/format/input, 4 numeric, 1 anything else.
int exit_code_for(const std::exception& e);

/// Checkpoint header check used by eval and export-latents. Throws ConfigError
/// when the checkpoint was trained on another world config and `force` is false.
void check_world_hash(const nlohmann::json& header, const sim::WorldConfig& world, const std::string& path, bool force,
                      std::ostream& out);

}  // namespace plato::cli
