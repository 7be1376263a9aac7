#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "plato/common/rng.hpp"
#include "plato/playlog/playlog.hpp"

namespace plato::segment {

using ContactSeq = std::vector<std::uint8_t>;

struct SmoothingConfig {
  int gap_fill = 3;  ///< steps; false-gaps this short inside contact are filled
  int min_len = 2;   ///< steps; shorter contact runs are dropped

  /// Defaults: 0.3 s gap fill and 0.2 s minimum run at control period dt.
  static SmoothingConfig for_dt(double dt, double gap_s = 0.3, double min_s = 0.2);
  void validate() const;
};

void to_json(nlohmann::json& j, const SmoothingConfig& c);
void from_json(const nlohmann::json& j, SmoothingConfig& c);

/// Inclusive step range; empty when end < begin.
struct Range {
  int begin = 0;
  int end = -1;

  bool empty() const { return end < begin; }
  int size() const { return empty() ? 0 : end - begin + 1; }
  friend bool operator==(const Range&, const Range&) = default;
};

struct InteractionInterval {
  int c_s = 0;
  int c_e = 0;
  friend bool operator==(const InteractionInterval&, const InteractionInterval&) = default;
};

/// Fills false-runs of length <= gap_fill flanked by contact, then drops true-runs shorter than min_len.
ContactSeq smooth_contact(const ContactSeq& raw, const SmoothingConfig& cfg);

/// Maximal contiguous true-runs in order.
std::vector<InteractionInterval> find_interactions(const ContactSeq& contact);

/// Interactions of one episode with derived pre/post phases. post(k) aliases pre(k+1).
struct PhaseSegmentation {
  int length = 0;
  std::vector<InteractionInterval> interactions;

  std::size_t size() const { return interactions.size(); }
  Range interaction(std::size_t k) const { return {interactions[k].c_s, interactions[k].c_e}; }
  Range pre(std::size_t k) const;
  Range post(std::size_t k) const;
};

PhaseSegmentation segment_episode(const ContactSeq& contact, const SmoothingConfig& cfg);
PhaseSegmentation segment_episode(const playlog::Episode& episode, const SmoothingConfig& cfg);

/// One training sample of index windows into an episode.
struct WindowSample {
  int episode = 0;
  int interaction = 0;  ///< k within the episode
  int tau_int_start = 0;
  /// tau_pre covers [tau_pre_start, tau_pre_start + H_pre - pre_pad) after `pre_pad`
  /// leading copies of step tau_pre_start.
  int tau_pre_start = 0;
  int pre_pad = 0;
  int goal_index = 0;

  bool padded() const { return pre_pad > 0; }
  /// Episode step of position i in the pre window.
  int pre_index(int i) const { return i < pre_pad ? tau_pre_start : tau_pre_start + i - pre_pad; }
};

/// Inclusive start ranges a window sampler draws from for one interaction.
struct WindowRanges {
  Range tau_int_start;
  Range tau_pre_start;  ///< never before the pre phase; short phases are padded instead
  Range goal;
  bool admissible() const { return !tau_int_start.empty(); }
};

WindowRanges window_ranges(const PhaseSegmentation& seg, std::size_t k, int H_int, int H_pre, int S);

/// Segmentation of a whole dataset plus the flat list of interactions that admit a window.
class DatasetSegmentation {
 public:
  DatasetSegmentation(std::vector<PhaseSegmentation> episodes, int H_int, int H_pre, int S);

  const std::vector<PhaseSegmentation>& episodes() const { return episodes_; }
  std::size_t admissible_count() const { return admissible_.size(); }
  std::size_t interaction_count() const;

  /// Interaction chosen uniformly over admissible interactions, then start indices
  /// and the goal uniformly from window_ranges. Throws DataError when none exist.
  WindowSample sample(Rng& rng) const;

  int H_int() const { return H_int_; }
  int H_pre() const { return H_pre_; }
  int S() const { return S_; }

 private:
  std::vector<PhaseSegmentation> episodes_;
  std::vector<std::pair<int, int>> admissible_;
  int H_int_, H_pre_, S_;
};

DatasetSegmentation segment_log(const playlog::PlayLog& log, const SmoothingConfig& cfg, int H_int, int H_pre, int S);

// ---- false-contact injection ----

struct InjectionReport {
  std::size_t true_interactions = 0;
  std::size_t false_interactions = 0;
  double achieved_pct = 0.0;
  bool reached = true;  ///< false when non-contact space ran out first
};

/// Counts interactions of the smoothed `after` contacts that overlap no interaction of `before`.
InjectionReport count_false_interactions(const std::vector<ContactSeq>& before, const std::vector<ContactSeq>& after,
                                         const SmoothingConfig& cfg);

/// Inserts synthetic contact runs into non-contact regions of the dataset until
/// the share of interactions that are false positives is target_pct (within 1 point).
/// Run lengths are drawn from the dataset's own interaction lengths; runs keep a
/// gap_fill + 1 margin from any contact so smoothing cannot merge them.
InjectionReport inject_false_contacts(std::vector<ContactSeq>& contacts, Rng& rng, double target_pct,
                                      const SmoothingConfig& cfg);

// ---- stats ----

struct SegmentStats {
  std::size_t episodes = 0;
  std::size_t steps = 0;
  std::size_t interactions = 0;
  std::size_t episodes_without_interaction = 0;
  std::size_t interaction_steps = 0;
  std::size_t raw_contact_steps = 0;
  std::vector<int> interaction_lengths;
  std::vector<int> pre_lengths;
};

SegmentStats segment_stats(const playlog::PlayLog& log, const SmoothingConfig& cfg);
void write_stats_text(const SegmentStats& s, std::ostream& out);
/// Histogram CSV: kind,length,count for interaction and pre phases.
void write_stats_csv(const SegmentStats& s, std::ostream& out);

}  // namespace plato::segment
