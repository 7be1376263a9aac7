#include "plato/segment/segment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>

#include "plato/common/error.hpp"
#include "plato/common/json_fields.hpp"

namespace plato::segment {

SmoothingConfig SmoothingConfig::for_dt(double dt, double gap_s, double min_s) {
  if (!(dt > 0)) throw ConfigError("smoothing: dt must be positive");
  SmoothingConfig c;
  c.gap_fill = static_cast<int>(std::lround(gap_s / dt));
  c.min_len = std::max(1, static_cast<int>(std::lround(min_s / dt)));
  return c;
}

void SmoothingConfig::validate() const {
  if (gap_fill < 0) throw ConfigError("smoothing.gap_fill must be >= 0");
  if (min_len < 1) throw ConfigError("smoothing.min_len must be >= 1");
}

void to_json(nlohmann::json& j, const SmoothingConfig& c) {
  j = {{"gap_fill", c.gap_fill}, {"min_len", c.min_len}};
}

void from_json(const nlohmann::json& j, SmoothingConfig& c) {
  StrictObject o(j, "smoothing");
  o.get("gap_fill", c.gap_fill);
  o.get("min_len", c.min_len);
  o.finish();
  c.validate();
}

ContactSeq smooth_contact(const ContactSeq& raw, const SmoothingConfig& cfg) {
  const int n = static_cast<int>(raw.size());
  ContactSeq out(raw.size());
  for (int i = 0; i < n; ++i) out[i] = raw[i] ? 1 : 0;

  // Fill interior gaps. A gap touching either end is not flanked and stays.
  for (int i = 0; i < n;) {
    if (out[i]) {
      ++i;
      continue;
    }
    int j = i;
    while (j < n && !out[j]) ++j;
    if (i > 0 && j < n && j - i <= cfg.gap_fill) std::fill(out.begin() + i, out.begin() + j, 1);
    i = j;
  }
  for (int i = 0; i < n;) {
    if (!out[i]) {
      ++i;
      continue;
    }
    int j = i;
    while (j < n && out[j]) ++j;
    if (j - i < cfg.min_len) std::fill(out.begin() + i, out.begin() + j, 0);
    i = j;
  }
  return out;
}

std::vector<InteractionInterval> find_interactions(const ContactSeq& contact) {
  std::vector<InteractionInterval> out;
  const int n = static_cast<int>(contact.size());
  for (int i = 0; i < n;) {
    if (!contact[i]) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < n && contact[j + 1]) ++j;
    out.push_back({i, j});
    i = j + 1;
  }
  return out;
}

Range PhaseSegmentation::pre(std::size_t k) const {
  const int begin = k == 0 ? 0 : interactions[k - 1].c_e + 1;
  return {begin, interactions[k].c_s - 1};
}

Range PhaseSegmentation::post(std::size_t k) const {
  const int end = k + 1 < interactions.size() ? interactions[k + 1].c_s - 1 : length - 1;
  return {interactions[k].c_e + 1, end};
}

PhaseSegmentation segment_episode(const ContactSeq& contact, const SmoothingConfig& cfg) {
  PhaseSegmentation seg;
  seg.length = static_cast<int>(contact.size());
  seg.interactions = find_interactions(smooth_contact(contact, cfg));
  return seg;
}

PhaseSegmentation segment_episode(const playlog::Episode& episode, const SmoothingConfig& cfg) {
  return segment_episode(episode.contact, cfg);
}

WindowRanges window_ranges(const PhaseSegmentation& seg, std::size_t k, int H_int, int H_pre, int S) {
  const auto& iv = seg.interactions[k];
  const int L = seg.length;
  WindowRanges r;
  r.tau_int_start = {std::max(0, iv.c_s - S), std::min(L, iv.c_e + S) - H_int};
  const int pre_begin = seg.pre(k).begin;
  const int pre_end = std::min(L, iv.c_s + S);  // exclusive
  r.tau_pre_start = {pre_begin, std::max(pre_begin, pre_end - H_pre)};
  r.goal = {iv.c_e, seg.post(k).empty() ? iv.c_e : seg.post(k).end};
  return r;
}

DatasetSegmentation::DatasetSegmentation(std::vector<PhaseSegmentation> episodes, int H_int, int H_pre, int S)
    : episodes_(std::move(episodes)), H_int_(H_int), H_pre_(H_pre), S_(S) {
  if (H_int < 1 || H_pre < 1 || S < 0) throw ConfigError("window: H_int, H_pre must be >= 1 and S >= 0");
  for (std::size_t e = 0; e < episodes_.size(); ++e) {
    for (std::size_t k = 0; k < episodes_[e].size(); ++k) {
      if (window_ranges(episodes_[e], k, H_int, H_pre, S).admissible()) {
        admissible_.emplace_back(static_cast<int>(e), static_cast<int>(k));
      }
    }
  }
}

std::size_t DatasetSegmentation::interaction_count() const {
  std::size_t n = 0;
  for (const auto& s : episodes_) n += s.size();
  return n;
}

WindowSample DatasetSegmentation::sample(Rng& rng) const {
  if (admissible_.empty()) {
    throw DataError("segmentation has no interaction long enough for a window of " + std::to_string(H_int_) +
                    " steps (" + std::to_string(interaction_count()) + " interactions)");
  }
  const auto [e, k] = admissible_[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(admissible_.size()) - 1))];
  const auto& seg = episodes_[e];
  const WindowRanges r = window_ranges(seg, k, H_int_, H_pre_, S_);

  WindowSample w;
  w.episode = e;
  w.interaction = k;
  w.tau_int_start = static_cast<int>(rng.uniform_int(r.tau_int_start.begin, r.tau_int_start.end));
  w.tau_pre_start = static_cast<int>(rng.uniform_int(r.tau_pre_start.begin, r.tau_pre_start.end));
  const int avail = std::min(seg.length, seg.interactions[k].c_s + S_) - w.tau_pre_start;
  w.pre_pad = std::max(0, H_pre_ - avail);
  w.goal_index = static_cast<int>(rng.uniform_int(r.goal.begin, r.goal.end));
  return w;
}

DatasetSegmentation segment_log(const playlog::PlayLog& log, const SmoothingConfig& cfg, int H_int, int H_pre, int S) {
  cfg.validate();
  std::vector<PhaseSegmentation> segs;
  segs.reserve(log.size());
  for (const auto& ep : log.episodes) segs.push_back(segment_episode(ep, cfg));
  return DatasetSegmentation(std::move(segs), H_int, H_pre, S);
}

// ---- false-contact injection ----

namespace {

bool overlaps_any(const InteractionInterval& a, const std::vector<InteractionInterval>& bs) {
  return std::any_of(bs.begin(), bs.end(), [&](const auto& b) { return a.c_s <= b.c_e && b.c_s <= a.c_e; });
}

double pct(std::size_t f, std::size_t t) { return f + t == 0 ? 0.0 : 100.0 * static_cast<double>(f) / (f + t); }

}  // namespace

InjectionReport count_false_interactions(const std::vector<ContactSeq>& before, const std::vector<ContactSeq>& after,
                                         const SmoothingConfig& cfg) {
  if (before.size() != after.size()) throw InputError("count_false_interactions: episode count mismatch");
  InjectionReport r;
  for (std::size_t e = 0; e < before.size(); ++e) {
    const auto truth = find_interactions(smooth_contact(before[e], cfg));
    for (const auto& iv : find_interactions(smooth_contact(after[e], cfg))) {
      if (overlaps_any(iv, truth)) {
        ++r.true_interactions;
      } else {
        ++r.false_interactions;
      }
    }
  }
  r.achieved_pct = pct(r.false_interactions, r.true_interactions);
  return r;
}

InjectionReport inject_false_contacts(std::vector<ContactSeq>& contacts, Rng& rng, double target_pct,
                                      const SmoothingConfig& cfg) {
  if (!(target_pct >= 0 && target_pct < 50)) throw ConfigError("target_pct must be in [0, 50)");
  cfg.validate();
  const std::vector<ContactSeq> original = contacts;

  std::vector<int> run_lengths;
  std::size_t n_true = 0;
  for (const auto& c : contacts) {
    for (const auto& iv : find_interactions(smooth_contact(c, cfg))) {
      run_lengths.push_back(iv.c_e - iv.c_s + 1);
      ++n_true;
    }
  }
  InjectionReport report = count_false_interactions(original, contacts, cfg);
  if (target_pct == 0) return report;
  if (n_true == 0) {
    report.reached = false;
    return report;
  }
  const double p = target_pct / 100.0;
  const auto wanted = static_cast<std::size_t>(std::llround(p * static_cast<double>(n_true) / (1.0 - p)));

  // blocked[e][t] marks steps within `margin` of any contact, original or injected.
  const int margin = cfg.gap_fill + 1;
  std::vector<std::vector<int>> blocked_prefix(contacts.size());
  auto rebuild = [&](std::size_t e) {
    const auto& c = contacts[e];
    const int n = static_cast<int>(c.size());
    std::vector<int> diff(n + 1, 0);
    for (int t = 0; t < n; ++t) {
      if (!c[t]) continue;
      diff[std::max(0, t - margin)] += 1;
      diff[std::min(n, t + margin + 1)] -= 1;
    }
    auto& pre = blocked_prefix[e];
    pre.assign(n + 1, 0);
    int run = 0;
    for (int t = 0; t < n; ++t) {
      run += diff[t];
      pre[t + 1] = pre[t] + (run > 0 ? 1 : 0);
    }
  };
  for (std::size_t e = 0; e < contacts.size(); ++e) rebuild(e);
  auto free_run = [&](std::size_t e, int s, int len) {
    const auto& pre = blocked_prefix[e];
    return pre[s + len] - pre[s] == 0;
  };

  std::size_t injected = 0;
  while (injected < wanted) {
    int len = std::max(cfg.min_len, run_lengths[static_cast<std::size_t>(
                                        rng.uniform_int(0, static_cast<std::int64_t>(run_lengths.size()) - 1))]);
    bool placed = false;
    while (!placed && len >= cfg.min_len) {
      std::int64_t n_slots = 0;
      for (std::size_t e = 0; e < contacts.size(); ++e) {
        const int n = static_cast<int>(contacts[e].size());
        for (int s = 0; s + len <= n; ++s) n_slots += free_run(e, s, len);
      }
      if (n_slots == 0) {
        len = len > cfg.min_len ? std::max(cfg.min_len, len / 2) : cfg.min_len - 1;
        continue;
      }
      std::int64_t pick = rng.uniform_int(0, n_slots - 1);
      for (std::size_t e = 0; e < contacts.size() && !placed; ++e) {
        const int n = static_cast<int>(contacts[e].size());
        for (int s = 0; s + len <= n; ++s) {
          if (!free_run(e, s, len)) continue;
          if (pick-- == 0) {
            std::fill(contacts[e].begin() + s, contacts[e].begin() + s + len, 1);
            rebuild(e);
            placed = true;
            break;
          }
        }
      }
    }
    if (!placed) break;
    ++injected;
  }

  report = count_false_interactions(original, contacts, cfg);
  report.reached = std::abs(report.achieved_pct - target_pct) <= 1.0;
  return report;
}

// ---- stats ----

SegmentStats segment_stats(const playlog::PlayLog& log, const SmoothingConfig& cfg) {
  SegmentStats s;
  s.episodes = log.size();
  for (const auto& ep : log.episodes) {
    s.steps += ep.contact.size();
    s.raw_contact_steps += static_cast<std::size_t>(std::count_if(ep.contact.begin(), ep.contact.end(),
                                                                  [](std::uint8_t c) { return c != 0; }));
    const PhaseSegmentation seg = segment_episode(ep, cfg);
    if (seg.size() == 0) ++s.episodes_without_interaction;
    for (std::size_t k = 0; k < seg.size(); ++k) {
      const int len = seg.interaction(k).size();
      s.interaction_lengths.push_back(len);
      s.interaction_steps += static_cast<std::size_t>(len);
      s.pre_lengths.push_back(seg.pre(k).size());
    }
    s.interactions += seg.size();
  }
  return s;
}

namespace {

std::map<int, int> histogram(const std::vector<int>& v) {
  std::map<int, int> h;
  for (int x : v) ++h[x];
  return h;
}

double mean(const std::vector<int>& v) {
  if (v.empty()) return 0.0;
  double sum = 0;
  for (int x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

void write_stats_text(const SegmentStats& s, std::ostream& out) {
  const auto frac = [&](std::size_t n) { return s.steps ? static_cast<double>(n) / s.steps : 0.0; };
  out << "episodes: " << s.episodes << "\n"
      << "steps: " << s.steps << "\n"
      << "interactions: " << s.interactions << "\n"
      << "episodes without interaction: " << s.episodes_without_interaction << "\n"
      << std::fixed << std::setprecision(3) << "raw contact fraction: " << frac(s.raw_contact_steps) << "\n"
      << "interaction coverage: " << frac(s.interaction_steps) << "\n"
      << "pre/post coverage: " << frac(s.steps - s.interaction_steps) << "\n"
      << std::setprecision(2) << "mean interaction length: " << mean(s.interaction_lengths) << " steps\n"
      << "mean pre length: " << mean(s.pre_lengths) << " steps\n";
  out << "interaction length histogram:\n";
  for (const auto& [len, n] : histogram(s.interaction_lengths)) out << "  " << len << ": " << n << "\n";
  out.unsetf(std::ios::floatfield);
}

void write_stats_csv(const SegmentStats& s, std::ostream& out) {
  out << "kind,length,count\n";
  for (const auto& [len, n] : histogram(s.interaction_lengths)) out << "interaction," << len << "," << n << "\n";
  for (const auto& [len, n] : histogram(s.pre_lengths)) out << "pre," << len << "," << n << "\n";
}

}  // namespace plato::segment
