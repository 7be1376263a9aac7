#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "plato/primitives/primitives.hpp"
#include "plato/sim/world.hpp"

namespace plato::playlog {

inline constexpr char kMagic[8] = {'P', 'L', 'A', 'Y', 'L', 'O', 'G', '1'};
inline constexpr int kVersion = 1;

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Dims {
  int robot = sim::ObservationLayout::kRobotDim;
  int object = sim::ObservationLayout::kBlockDim;
  int action = 3;  // target x, target y, grab

  int record_bytes() const { return 4 * (robot + object + action) + 1; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// One episode stored column-wise: row t of each matrix is step t.
struct Episode {
  RowMatrixF robot;
  RowMatrixF object;
  RowMatrixF action;
  std::vector<std::uint8_t> contact;

  Episode() = default;
  Episode(int length, const Dims& d)
      : robot(length, d.robot), object(length, d.object), action(length, d.action), contact(length, 0) {}

  int length() const { return static_cast<int>(contact.size()); }
  /// Full observation row s_t = S^r ⊕ S^o.
  Eigen::VectorXf state(int t) const;

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct Manifest {
  Dims dims;
  double dt = 0.1;  ///< seconds per control step
  std::string config_hash;
  nlohmann::json world_config = nlohmann::json::object();
  std::string source = "scripted";
  std::vector<std::int64_t> lengths;
  /// World seed of each episode when it was generated from a fresh world (replay support).
  std::vector<std::uint64_t> episode_seeds;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct PlayLog {
  Manifest manifest;
  std::vector<Episode> episodes;

  /// Empty log whose manifest describes `config`.
  static PlayLog for_world(const sim::WorldConfig& config, std::string source = "scripted");

  std::size_t size() const { return episodes.size(); }
  std::int64_t total_steps() const;

  friend bool operator==(const PlayLog&, const PlayLog&) = default;
};

/// Adds an episode; throws InputError on any dim mismatch or length < 2.
void append_episode(PlayLog& log, Episode episode, std::optional<std::uint64_t> seed = std::nullopt);

std::vector<std::uint8_t> serialize(const PlayLog& log);
PlayLog deserialize(const std::vector<std::uint8_t>& bytes);

/// Throws FormatError(kIo) when the file cannot be written.
void save(const PlayLog& log, const std::string& path);
PlayLog load(const std::string& path);

/// Streaming access: reads the manifest eagerly and episodes on demand.
class Reader {
 public:
  explicit Reader(const std::string& path);

  const Manifest& manifest() const { return manifest_; }
  std::size_t size() const { return manifest_.lengths.size(); }
  Episode read(std::size_t index);

 private:
  std::ifstream in_;
  Manifest manifest_;
  std::vector<std::uint64_t> offsets_;
};

struct ValidationReport {
  bool ok = true;
  std::int64_t episode = -1;
  std::int64_t step = -1;
  std::string field;
  std::string message;
};

/// Checks dims, lengths, config hash, finiteness and the {0,1} byte fields;
/// reports the first offending (episode, step, field).
ValidationReport validate(const PlayLog& log);

/// One row per step: episode, step, robot fields, object fields, action fields, contact.
void export_csv(const PlayLog& log, std::ostream& out);

// ---- primitive label side-channel (diagnostics only, never read by training) ----

using EpisodeLabels = std::vector<primitives::PrimitiveLabel>;

/// `<name>.labels.json` next to `<name>.<ext>`.
std::string labels_path(const std::string& log_path);
void save_labels(const std::vector<EpisodeLabels>& labels, const std::string& path);
std::vector<EpisodeLabels> load_labels(const std::string& path);

// ---- scripted play ----

struct GenerateConfig {
  sim::WorldConfig world;
  primitives::PrimitiveRanges ranges;
  primitives::KindWeights weights = primitives::uniform_weights();
  int max_episode_steps = 100;
};

void to_json(nlohmann::json& j, const GenerateConfig& c);
void from_json(const nlohmann::json& j, GenerateConfig& c);

struct GeneratedPlay {
  PlayLog log;
  std::vector<EpisodeLabels> labels;
};

/// Chains randomly sampled primitives in one continuous world per episode and
/// records (observation, action, contact) each control step. Episodes are cut at
/// max_episode_steps, and the world is re-sampled between episodes.
GeneratedPlay generate_play(const GenerateConfig& config, std::uint64_t seed, std::int64_t duration_steps);

/// Re-simulates episode `index` from its recorded seed and actions. Returns the
/// first step whose recorded observation differs, or -1 when every step matches.
std::int64_t replay_mismatch(const PlayLog& log, std::size_t index);

/// Records a step for any producer (scripted or teleop): observation, action
/// quantized to float32, contact flag of the observed state.
void record_step(Episode& ep, int t, const Eigen::VectorXd& obs, int robot_dim, const sim::Action& action, bool contact);

/// Action exactly as it is stored on disk (float32 round trip).
sim::Action quantized(const sim::Action& a);

}  // namespace plato::playlog
