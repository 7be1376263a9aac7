#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "plato/playlog/playlog.hpp"
#include "plato/sim/world.hpp"

namespace plato::cli {

/// Held arrow keys and the grab toggle as last reported by the client.
struct KeyState {
  bool left = false, right = false, up = false, down = false;
  bool grab = false;
};

/// Server-side teleop state, independent of the transport.
///
/// Client -> server: {"keys": {"left": b, "right": b, "up": b, "down": b}, "grab": b}
/// and {"cmd": "record_start" | "record_stop" | "reset" | "save", "path": "..."}.
/// Server -> client: frames from frame(), and one {"ack": cmd, "ok": b, ...} reply per cmd.
class TeleopSession {
 public:
  TeleopSession(const sim::WorldConfig& config, std::uint64_t seed);

  /// Handles one client text message; returns the reply for commands.
  /// Malformed messages give {"error": "..."} and change nothing.
  std::optional<nlohmann::json> handle(const std::string& text);

  /// One control step: held keys move the target at ego_max_speed; records the
  /// step first when recording.
  void step();

  nlohmann::json frame() const;

  const sim::World& world() const { return world_; }
  const KeyState& keys() const { return keys_; }
  const sim::Vec2& target() const { return target_; }
  bool recording() const { return recording_; }
  /// Finished episodes only; the one being recorded is added on record_stop or save.
  const playlog::PlayLog& log() const { return log_; }

  /// Ends the current recording (kept when it has >= 2 steps) and writes PLAYLOG1.
  void save(const std::string& path);

 private:
  nlohmann::json command(const std::string& cmd, const nlohmann::json& msg);
  void finish_recording();
  void reset_world();

  sim::WorldConfig config_;
  std::uint64_t seed_;
  std::uint64_t resets_ = 0;
  sim::World world_;
  std::uint64_t world_seed_;
  KeyState keys_;
  sim::Vec2 target_;
  bool recording_ = false;
  bool episode_fresh_ = true;  ///< no step taken since the world was sampled
  std::optional<std::uint64_t> episode_seed_;
  std::vector<Eigen::VectorXd> rec_obs_;
  std::vector<sim::Action> rec_act_;
  std::vector<bool> rec_contact_;
  playlog::PlayLog log_;
};

struct TeleopServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  ///< 0 picks a free port
  double render_hz = 20.0;
  bool handle_signals = false;  ///< stop cleanly on SIGINT/SIGTERM
};

/// Websocket server around one shared TeleopSession. Frames go to every connected
/// client at render_hz; the world advances at its own control rate. Plain HTTP
/// requests get a short text page describing the protocol.
class TeleopServer {
 public:
  TeleopServer(const sim::WorldConfig& config, std::uint64_t seed, TeleopServerOptions opt);
  ~TeleopServer();

  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Port actually bound (after construction).
  unsigned short port() const;
  /// Serves until stop() is called.
  void run();
  /// Thread-safe.
  void stop();

  /// Runs `fn` with the session under the server lock.
  template <typename Fn>
  auto with_session(Fn&& fn) {
    std::lock_guard<std::mutex> lock(mutex_);
    return fn(session_);
  }

  struct Impl;  // transport internals, defined in teleop_server.cpp

 private:
  std::mutex mutex_;
  TeleopSession session_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace plato::cli
