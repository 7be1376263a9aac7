#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plato/eval/eval.hpp"
#include "plato/models/models.hpp"
#include "plato/playlog/playlog.hpp"
#include "plato/segment/segment.hpp"

namespace plato::cli {

/// Everything a run needs, stored as one JSON document. Absent keys keep their defaults,
/// unknown keys raise ConfigError.
///
///   {"world": {...}, "weights": {"PushL": 1, ...}, "ranges": {...}, "max_episode_steps": 100,
///    "episodes": 300, "smoothing": {...}, "variant": "PLATO", "model": {...},
///    "seeds": {"collect": 0, "train": 0, "eval": 0},
///    "eval": {"episodes": 100, "primitives": ["PushL", ...], "metric": {...}},
///    "paths": {"data": "", "checkpoint": "", "output": ""}}
struct RunConfig {
  playlog::GenerateConfig collect;
  int episodes = 300;
  segment::SmoothingConfig smoothing;
  models::Variant variant = models::Variant::kPLATO;
  /// Fields given under "model"; applied on top of the variant's defaults.
  nlohmann::json model_overrides = nlohmann::json::object();

  struct Seeds {
    std::uint64_t collect = 0;
    std::uint64_t train = 0;
    std::uint64_t eval = 0;
  } seeds;

  struct Eval {
    int episodes = 100;
    std::vector<primitives::PrimitiveKind> primitives{primitives::kAllKinds.begin(), primitives::kAllKinds.end()};
    /// Fields given under "eval.metric" (eps_pos, eps_rot_deg, min_progress, max_steps).
    nlohmann::json metric_overrides = nlohmann::json::object();
  } eval;

  struct Paths {
    std::string data;
    std::string checkpoint;
    std::string output;
  } paths;

  /// Model config for `v`: its defaults with model_overrides applied.
  models::ModelConfig model_for(models::Variant v) const;
  models::ModelConfig model() const { return model_for(variant); }
  eval::SuccessMetric metric() const;
  eval::EvaluateOptions eval_options(int jobs = 1) const;

  /// FNV-1a of the canonical JSON form.
  std::string hash() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Sets `doc[a][b][c] = value` for "a.b.c". The value is parsed as JSON when it
/// parses (numbers, bools, arrays) and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& dot_path, const std::string& value);

/// Reads `--a.b value` pairs out of leftover command-line arguments.
/// Throws ConfigError on a dangling key or a token that is not an option.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& args);

/// File (or {} when `path` is empty) + overrides, validated.
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace plato::cli
