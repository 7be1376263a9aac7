#include <algorithm>

#include "plato/cli/teleop.hpp"
#include "plato/common/error.hpp"

namespace plato::cli {

using nlohmann::json;

TeleopSession::TeleopSession(const sim::WorldConfig& config, std::uint64_t seed)
    : config_(config),
      seed_(seed),
      world_(config, derive_seed(seed, 0)),
      world_seed_(derive_seed(seed, 0)),
      target_(world_.state().ego.position),
      log_(playlog::PlayLog::for_world(config, "teleop")) {}

void TeleopSession::reset_world() {
  world_seed_ = derive_seed(seed_, ++resets_);
  world_ = sim::World(config_, world_seed_);
  target_ = world_.state().ego.position;
  episode_fresh_ = true;
}

std::optional<json> TeleopSession::handle(const std::string& text) {
  const json msg = json::parse(text, nullptr, false);
  if (msg.is_discarded() || !msg.is_object()) return json{{"error", "message is not a JSON object"}};
  try {
    if (msg.contains("cmd")) {
      if (!msg["cmd"].is_string()) return json{{"error", "cmd must be a string"}};
      return command(msg["cmd"].get<std::string>(), msg);
    }
    if (!msg.contains("keys") && !msg.contains("grab")) return json{{"error", "expected keys, grab or cmd"}};
    KeyState k = keys_;
    if (msg.contains("keys")) {
      const json& ks = msg["keys"];
      if (!ks.is_object()) return json{{"error", "keys must be an object"}};
      for (auto it = ks.begin(); it != ks.end(); ++it) {
        if (!it.value().is_boolean()) return json{{"error", "key '" + it.key() + "' must be a bool"}};
        const bool v = it.value().get<bool>();
        if (it.key() == "left") k.left = v;
        else if (it.key() == "right") k.right = v;
        else if (it.key() == "up") k.up = v;
        else if (it.key() == "down") k.down = v;
        else return json{{"error", "unknown key '" + it.key() + "'"}};
      }
    }
    if (msg.contains("grab")) {
      if (!msg["grab"].is_boolean()) return json{{"error", "grab must be a bool"}};
      k.grab = msg["grab"].get<bool>();
    }
    keys_ = k;
    return std::nullopt;
  } catch (const std::exception& e) {
    return json{{"error", e.what()}};
  }
}

json TeleopSession::command(const std::string& cmd, const json& msg) {
  json ack{{"ack", cmd}, {"ok", true}};
  if (cmd == "record_start") {
    if (recording_) return {{"ack", cmd}, {"ok", false}, {"error", "already recording"}};
    recording_ = true;
    // An episode started on an untouched world can be re-simulated from its seed.
    episode_seed_ = episode_fresh_ ? std::optional<std::uint64_t>(world_seed_) : std::nullopt;
  } else if (cmd == "record_stop") {
    finish_recording();
    ack["episodes"] = log_.size();
  } else if (cmd == "reset") {
    finish_recording();
    reset_world();
  } else if (cmd == "save") {
    std::string path = "teleop.playlog";
    if (msg.contains("path")) {
      if (!msg["path"].is_string()) return {{"ack", cmd}, {"ok", false}, {"error", "path must be a string"}};
      path = msg["path"].get<std::string>();
    }
    try {
      save(path);
    } catch (const std::exception& e) {
      return {{"ack", cmd}, {"ok", false}, {"error", e.what()}};
    }
    ack["path"] = path;
    ack["episodes"] = log_.size();
    ack["steps"] = log_.total_steps();
  } else {
    return {{"ack", cmd}, {"ok", false}, {"error", "unknown cmd"}};
  }
  return ack;
}

void TeleopSession::step() {
  const double v = config_.ego_max_speed * config_.control_dt();
  const sim::Vec2 dir((keys_.right ? 1.0 : 0.0) - (keys_.left ? 1.0 : 0.0),
                      (keys_.up ? 1.0 : 0.0) - (keys_.down ? 1.0 : 0.0));
  const sim::Vec2 ego = world_.state().ego.position;
  target_ += dir * v;
  // Keep the target within one step of travel so releasing the keys stops the ego
  // promptly even after it was blocked.
  const sim::Vec2 lead = target_ - ego;
  if (lead.norm() > v) target_ = ego + lead * (v / lead.norm());
  const double r = config_.ego_radius;
  target_.x() = std::clamp(target_.x(), r, config_.arena_width - r);
  target_.y() = std::clamp(target_.y(), r, config_.arena_height - r);

  sim::Action a;
  a.target_position = target_;
  a.grab = keys_.grab;
  if (recording_) {
    a = playlog::quantized(a);
    rec_obs_.push_back(world_.observe());
    rec_contact_.push_back(world_.state().contact);
    rec_act_.push_back(a);
  }
  world_.step(a);
  episode_fresh_ = false;
}

void TeleopSession::finish_recording() {
  if (!recording_) return;
  recording_ = false;
  const int n = static_cast<int>(rec_obs_.size());
  if (n >= 2) {
    playlog::Episode ep(n, log_.manifest.dims);
    for (int t = 0; t < n; ++t) {
      playlog::record_step(ep, t, rec_obs_[t], log_.manifest.dims.robot, rec_act_[t], rec_contact_[t]);
    }
    playlog::append_episode(log_, std::move(ep), episode_seed_);
  }
  rec_obs_.clear();
  rec_act_.clear();
  rec_contact_.clear();
}

void TeleopSession::save(const std::string& path) {
  finish_recording();
  if (log_.size() == 0) throw DataError("nothing recorded yet");
  playlog::save(log_, path);
}

json TeleopSession::frame() const {
  const sim::WorldState& s = world_.state();
  json blocks = json::array();
  for (const auto& b : s.blocks) {
    blocks.push_back({b.position.x(), b.position.y(), b.angle, 2 * b.half_extents.x(), 2 * b.half_extents.y()});
  }
  return {{"t", s.step_index},
          {"ego", {s.ego.position.x(), s.ego.position.y(), s.ego.velocity.x(), s.ego.velocity.y()}},
          {"tether", s.ego.tether_active},
          {"blocks", blocks},
          {"contact", s.contact},
          {"recording", recording_}};
}

}  // namespace plato::cli
