#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "plato/cli/commands.hpp"
#include "plato/cli/teleop.hpp"
#include "plato/common/error.hpp"
#include "plato/segment/segment.hpp"

using namespace plato;
using namespace plato::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "plato_test_cli";
  fs::create_directories(d);
  return d / name;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// Runs the plato binary; returns its exit code.
int run_plato(const std::string& args) {
  const std::string cmd = std::string(PLATO_BIN) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

playlog::PlayLog constant_contact_log(int episodes, bool contact) {
  playlog::GenerateConfig gc;
  playlog::PlayLog log = playlog::generate_play(gc, 5, static_cast<std::int64_t>(episodes) * gc.max_episode_steps).log;
  log.episodes.resize(static_cast<std::size_t>(episodes));
  log.manifest.lengths.resize(static_cast<std::size_t>(episodes));
  log.manifest.episode_seeds.clear();
  for (auto& ep : log.episodes) std::fill(ep.contact.begin(), ep.contact.end(), contact ? 1 : 0);
  return log;
}

}  // namespace

// ---- RunConfig ----

TEST(RunConfig, JsonRoundTripKeepsHash) {
  RunConfig c;
  c.episodes = 17;
  c.seeds.train = 4;
  c.variant = models::Variant::kLMP;
  c.model_overrides = {{"beta", 0.25}};
  const json j = c;
  const RunConfig back = j.get<RunConfig>();
  EXPECT_EQ(json(back), j);
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_DOUBLE_EQ(back.model().beta, 0.25);
  EXPECT_NE(RunConfig{}.hash(), c.hash());
}

TEST(RunConfig, EmptyDocumentGivesDefaults) {
  const RunConfig c = json::object().get<RunConfig>();
  EXPECT_EQ(c.episodes, 300);
  EXPECT_EQ(c.variant, models::Variant::kPLATO);
  EXPECT_EQ(c.hash(), RunConfig{}.hash());
  EXPECT_EQ(c.model().latent_dim, models::ModelConfig::defaults_for(models::Variant::kPLATO).latent_dim);
}

TEST(RunConfig, UnknownKeysRejected) {
  EXPECT_THROW(json({{"episodez", 3}}).get<RunConfig>(), ConfigError);
  EXPECT_THROW(load_run_config("", {{"world.n_blokcs", "2"}}), ConfigError);
  EXPECT_THROW(load_run_config("", {{"model.betta", "0.1"}}), ConfigError);
}

TEST(RunConfig, DotPathOverrides) {
  json doc = json::object();
  apply_override(doc, "model.beta", "1e-3");
  apply_override(doc, "paths.data", "play.playlog");
  apply_override(doc, "eval.primitives", "[\"Lift\"]");
  EXPECT_DOUBLE_EQ(doc["model"]["beta"].get<double>(), 1e-3);
  EXPECT_EQ(doc["paths"]["data"], "play.playlog");
  const RunConfig c = doc.get<RunConfig>();
  EXPECT_DOUBLE_EQ(c.model().beta, 1e-3);
  ASSERT_EQ(c.eval.primitives.size(), 1u);
  EXPECT_EQ(c.eval.primitives[0], primitives::PrimitiveKind::kLift);

  const auto ov = parse_overrides({"--model.steps", "10", "--seeds.train", "3"});
  ASSERT_EQ(ov.size(), 2u);
  EXPECT_EQ(ov[0], (std::pair<std::string, std::string>{"model.steps", "10"}));
  const RunConfig d = load_run_config("", ov);
  EXPECT_EQ(d.model().steps, 10);
  EXPECT_EQ(d.seeds.train, 3u);
  EXPECT_THROW(parse_overrides({"--model.steps"}), ConfigError);
  EXPECT_THROW(parse_overrides({"steps", "10"}), ConfigError);
}

TEST(RunConfig, FileWithOverridesOnTop) {
  const fs::path p = scratch("cfg.json");
  std::ofstream(p) << R"({"episodes": 5, "model": {"beta": 0.5}})";
  const RunConfig c = load_run_config(p.string(), {{"model.beta", "0.125"}});
  EXPECT_EQ(c.episodes, 5);
  EXPECT_DOUBLE_EQ(c.model().beta, 0.125);
  std::ofstream(p) << "{broken";
  EXPECT_THROW(load_run_config(p.string()), ConfigError);
}

// ---- exit codes ----

TEST(ExitCodes, MapErrorTypes) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(exit_code_for(UsageError("x")), 2);
  EXPECT_EQ(exit_code_for(DataError("x")), 3);
  EXPECT_EQ(exit_code_for(InputError("x")), 3);
  EXPECT_EQ(exit_code_for(NumericError("x")), 4);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 1);
}

TEST(ExitCodes, WorldHashMismatchNeedsForce) {
  const sim::WorldConfig w;
  std::ostringstream out;
  EXPECT_NO_THROW(check_world_hash({{"world_hash", w.hash()}}, w, "a.ckpt", false, out));
  EXPECT_THROW(check_world_hash({{"world_hash", "feed"}}, w, "a.ckpt", false, out), ConfigError);
  EXPECT_NO_THROW(check_world_hash({{"world_hash", "feed"}}, w, "a.ckpt", true, out));
  EXPECT_NE(out.str().find("warning"), std::string::npos);
}

// ---- subcommands through the binary ----

TEST(Binary, CollectOneEpisodeDeterministic) {
  const fs::path a = scratch("c1.playlog"), b = scratch("c2.playlog");
  ASSERT_EQ(run_plato("collect --episodes 1 --seed 9 --out " + a.string()), 0);
  ASSERT_EQ(run_plato("collect --episodes 1 --seed 9 --out " + b.string()), 0);
  EXPECT_EQ(playlog::load(a.string()).size(), 1u);
  EXPECT_EQ(read_bytes(a), read_bytes(b));
  EXPECT_EQ(read_bytes(playlog::labels_path(a.string())), read_bytes(playlog::labels_path(b.string())));
  EXPECT_TRUE(fs::exists(playlog::labels_path(a.string())));
  EXPECT_EQ(run_plato("replay --data " + a.string()), 0);
}

TEST(Binary, InvalidConfigIsExitTwo) {
  const fs::path out = scratch("bad.playlog");
  EXPECT_EQ(run_plato("collect --episodes 1 --out " + out.string() + " --world.n_blokcs 2"), 2);
  EXPECT_EQ(run_plato("collect --episodes 1 --out " + out.string() + " --world.arena_width -1"), 2);
  EXPECT_EQ(run_plato("train --data /nonexistent/x.playlog --out " + scratch("x.ckpt").string()), 3);
  EXPECT_NE(run_plato("no-such-subcommand"), 0);
}

TEST(Binary, ZeroInteractionDataIsExitThreeForPlato) {
  const fs::path data = scratch("nocontact.playlog");
  playlog::save(constant_contact_log(3, false), data.string());
  const std::string base = "train --data " + data.string() + " --steps 3 --model.batch_size 4 --out ";
  EXPECT_EQ(run_plato(base + scratch("p.ckpt").string() + " --variant PLATO"), 3);
  EXPECT_EQ(run_plato(base + scratch("r.ckpt").string() + " --variant PLATO_R"), 3);
  // LMP never segments
  EXPECT_EQ(run_plato(base + scratch("l.ckpt").string() + " --variant LMP"), 0);
}

TEST(Binary, BetaOverrideReachesMetricsHeader) {
  const fs::path data = scratch("beta.playlog"), ckpt = scratch("beta.ckpt");
  ASSERT_EQ(run_plato("collect --episodes 20 --seed 2 --out " + data.string()), 0);
  ASSERT_EQ(run_plato("train --data " + data.string() + " --variant LMP --steps 3 --model.batch_size 4 --beta 1e-3 --out " +
                  ckpt.string()),
            0);
  std::ifstream m(ckpt.string() + ".metrics.csv");
  std::string l1, l2;
  std::getline(m, l1);
  std::getline(m, l2);
  EXPECT_NE(l1.find("variant=LMP"), std::string::npos) << l1;
  ASSERT_EQ(l2.rfind("# model=", 0), 0u) << l2;
  EXPECT_DOUBLE_EQ(json::parse(l2.substr(8)).at("beta").get<double>(), 1e-3);
}

// ---- subcommands in process ----

TEST(SegmentStats, AllContactLogHasOneInteractionPerEpisode) {
  const fs::path data = scratch("allcontact.playlog");
  playlog::save(constant_contact_log(6, true), data.string());
  std::ostringstream out;
  const segment::SegmentStats s = segment_stats(RunConfig{}, {data.string(), ""}, out);
  EXPECT_EQ(s.episodes, 6u);
  EXPECT_EQ(s.interactions, 6u);
  EXPECT_EQ(s.episodes_without_interaction, 0u);
}

TEST(AblateContact, EightPercentAchievedOnScriptedPlay) {
  const fs::path data = scratch("ablate.playlog"), dir = scratch("ablate_out");
  playlog::GenerateConfig gc;
  playlog::save(playlog::generate_play(gc, 3, 300LL * gc.max_episode_steps).log, data.string());
  AblateArgs a;
  a.data = data.string();
  a.out_dir = dir.string();
  a.pct = 8.0;
  a.train = false;
  std::ostringstream out;
  const segment::InjectionReport r = ablate_contact(RunConfig{}, a, out);
  EXPECT_GE(r.achieved_pct, 7.0);
  EXPECT_LE(r.achieved_pct, 9.0);
  // recount from the written log against the original
  const playlog::PlayLog before = playlog::load(data.string()), after = playlog::load((dir / "corrupted.playlog").string());
  std::vector<segment::ContactSeq> cb, ca;
  for (const auto& ep : before.episodes) cb.push_back(ep.contact);
  for (const auto& ep : after.episodes) ca.push_back(ep.contact);
  const segment::InjectionReport re = segment::count_false_interactions(cb, ca, segment::SmoothingConfig{});
  EXPECT_EQ(re.false_interactions, r.false_interactions);
  EXPECT_NEAR(re.achieved_pct, r.achieved_pct, 1e-9);
  a.pct = 150;
  EXPECT_THROW(ablate_contact(RunConfig{}, a, out), ConfigError);
}

TEST(Replay, ScriptedLogMatchesAndTamperedLogFails) {
  const fs::path data = scratch("replay.playlog");
  playlog::GenerateConfig gc;
  playlog::PlayLog log = playlog::generate_play(gc, 8, 10LL * gc.max_episode_steps).log;
  playlog::save(log, data.string());
  std::ostringstream out;
  EXPECT_NO_THROW(replay({data.string(), std::nullopt}, out));
  log.episodes[2].object(5, 0) += 0.25f;
  playlog::save(log, data.string());
  EXPECT_NO_THROW(replay({data.string(), 1}, out));
  EXPECT_THROW(replay({data.string(), 2}, out), DataError);
}

// ---- teleop session ----

TEST(TeleopSession, HeldKeyMovesTargetAtMaxSpeed) {
  const sim::WorldConfig w;
  TeleopSession s(w, 1);
  const sim::Vec2 t0 = s.target();
  const bool go_right = t0.x() < w.arena_width / 2;
  EXPECT_EQ(s.handle(json{{"keys", {{go_right ? "right" : "left", true}}}}.dump()), std::nullopt);
  s.step();
  EXPECT_NEAR(std::abs(s.target().x() - t0.x()), w.ego_max_speed * w.control_dt(), 1e-12);
  EXPECT_NEAR(s.target().y(), t0.y(), 1e-12);
  const double x0 = s.world().state().ego.position.x();
  for (int i = 0; i < 10; ++i) s.step();
  EXPECT_GT((go_right ? 1 : -1) * (s.world().state().ego.position.x() - x0), 0.0);
}

TEST(TeleopSession, DiagonalKeysSum) {
  const sim::WorldConfig w;
  TeleopSession s(w, 2);
  const sim::Vec2 t0 = s.target();
  const bool right = t0.x() < w.arena_width / 2, up = t0.y() < w.arena_height / 2;
  s.handle(json{{"keys", {{right ? "right" : "left", true}, {up ? "up" : "down", true}}}}.dump());
  s.step();
  const sim::Vec2 d = s.target() - t0;
  EXPECT_NEAR(std::abs(d.x()), std::abs(d.y()), 1e-12);
  EXPECT_GT(std::abs(d.x()), 0.0);
}

TEST(TeleopSession, MalformedMessagesChangeNothing) {
  TeleopSession s(sim::WorldConfig{}, 3);
  for (const char* m : {"{not json", "[1,2]", "{\"keys\": {\"left\": 1}}", "{\"keys\": {\"jump\": true}}",
                        "{\"cmd\": 4}", "{\"hello\": true}"}) {
    const auto r = s.handle(m);
    ASSERT_TRUE(r.has_value()) << m;
    EXPECT_TRUE(r->contains("error")) << m;
  }
  EXPECT_FALSE(s.keys().left);
  const auto r = s.handle(R"({"cmd": "fly"})");
  ASSERT_TRUE(r);
  EXPECT_FALSE(r->at("ok").get<bool>());
}

TEST(TeleopSession, GrabEngagesTetherNearBlock) {
  const sim::WorldConfig w;
  TeleopSession s(w, 4);
  bool tethered = false;
  for (int i = 0; i < 600 && !tethered; ++i) {
    const sim::Vec2 d = s.world().state().blocks[0].position - s.world().state().ego.position;
    const double dead = 0.05;
    s.handle(json{{"keys", {{"left", d.x() < -dead}, {"right", d.x() > dead}, {"down", d.y() < -dead},
                            {"up", d.y() > dead}}},
                  {"grab", true}}
                 .dump());
    s.step();
    tethered = s.frame().at("tether").get<bool>();
  }
  EXPECT_TRUE(tethered);
  s.handle(R"({"grab": false})");
  s.step();
  s.step();
  EXPECT_FALSE(s.frame().at("tether").get<bool>());
}

TEST(TeleopSession, FrameMatchesWireShape) {
  TeleopSession s(sim::WorldConfig{}, 5);
  const json f = s.frame();
  for (const char* k : {"t", "ego", "tether", "blocks", "contact", "recording"}) EXPECT_TRUE(f.contains(k)) << k;
  EXPECT_EQ(f["ego"].size(), 4u);
  ASSERT_EQ(f["blocks"].size(), s.world().state().blocks.size());
  EXPECT_EQ(f["blocks"][0].size(), 5u);
  EXPECT_EQ(f["t"], 0);
  s.step();
  EXPECT_EQ(s.frame()["t"], 1);
}

TEST(TeleopSession, RecordAndSaveWritesValidReplayableLog) {
  const sim::WorldConfig w;
  TeleopSession s(w, 6);
  const fs::path p = scratch("teleop.playlog");
  EXPECT_FALSE(s.handle(R"({"cmd": "save", "path": ")" + p.string() + "\"}")->at("ok").get<bool>());
  EXPECT_TRUE(s.handle(R"({"cmd": "record_start"})")->at("ok").get<bool>());
  EXPECT_FALSE(s.handle(R"({"cmd": "record_start"})")->at("ok").get<bool>());
  EXPECT_TRUE(s.frame()["recording"].get<bool>());
  s.handle(R"({"keys": {"up": true}, "grab": true})");
  for (int i = 0; i < 40; ++i) s.step();
  s.handle(R"({"keys": {"up": false, "left": true}})");
  for (int i = 0; i < 40; ++i) s.step();
  const json ack = *s.handle(R"({"cmd": "save", "path": ")" + p.string() + "\"}");
  ASSERT_TRUE(ack.at("ok").get<bool>()) << ack;
  EXPECT_EQ(ack["episodes"], 1);
  EXPECT_EQ(ack["steps"], 80);
  EXPECT_FALSE(s.recording());

  const playlog::PlayLog log = playlog::load(p.string());
  EXPECT_TRUE(playlog::validate(log).ok) << playlog::validate(log).message;
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log.episodes[0].length(), 80);
  EXPECT_EQ(playlog::replay_mismatch(log, 0), -1);
  EXPECT_NO_THROW(segment::segment_episode(log.episodes[0], segment::SmoothingConfig{}));

  // A recording started mid-session cannot be re-simulated from the seed.
  s.handle(R"({"cmd": "record_start"})");
  s.step();
  s.step();
  EXPECT_EQ(s.handle(R"({"cmd": "record_stop"})")->at("episodes"), 2);
  EXPECT_TRUE(s.log().manifest.episode_seeds.empty());
  // reset ends the recording and samples a new world
  s.handle(R"({"cmd": "record_start"})");
  s.step();
  s.handle(R"({"cmd": "reset"})");
  EXPECT_FALSE(s.recording());
  EXPECT_EQ(s.frame()["t"], 0);
  EXPECT_EQ(s.log().size(), 2u);  // one step is too short to keep
}

// ---- teleop server over a real socket ----

namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct ServerFixture {
  TeleopServer server;
  std::thread thread;
  explicit ServerFixture(std::uint64_t seed) : server(sim::WorldConfig{}, seed, {"127.0.0.1", 0, 20.0, false}) {
    thread = std::thread([this] { server.run(); });
  }
  ~ServerFixture() {
    server.stop();
    thread.join();
  }
};

struct Client {
  net::io_context ioc;
  websocket::stream<tcp::socket> ws{ioc};
  explicit Client(unsigned short port) {
    tcp::resolver r(ioc);
    net::connect(ws.next_layer(), r.resolve("127.0.0.1", std::to_string(port)));
    ws.handshake("127.0.0.1", "/");
  }
  json read() {
    beast::flat_buffer buf;
    ws.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }
  void send(const json& j) { ws.write(net::buffer(j.dump())); }
  void send_raw(const std::string& s) { ws.write(net::buffer(s)); }
  // Next non-frame message, skipping frames.
  json reply() {
    for (int i = 0; i < 200; ++i) {
      json m = read();
      if (!m.contains("t")) return m;
    }
    return {};
  }
  json frame() {
    for (;;) {
      json m = read();
      if (m.contains("t")) return m;
    }
  }
  ~Client() {
    beast::error_code ec;
    ws.close(websocket::close_code::normal, ec);
  }
};

}  // namespace

TEST(TeleopServer, FramesArriveAtRenderRate) {
  ServerFixture f(11);
  Client c(f.server.port());
  c.frame();
  const auto t0 = std::chrono::steady_clock::now();
  int n = 0;
  while (std::chrono::steady_clock::now() - t0 < std::chrono::seconds(2)) {
    c.frame();
    ++n;
  }
  EXPECT_GE(n, 30);
  EXPECT_LE(n, 50);
}

TEST(TeleopServer, KeysMoveEgoAndCommandsAreAcked) {
  ServerFixture f(12);
  Client c(f.server.port());
  const json f0 = c.frame();
  const double x0 = f0["ego"][0].get<double>();
  const bool right = x0 < sim::WorldConfig{}.arena_width / 2;
  c.send({{"cmd", "record_start"}});
  const json ack = c.reply();
  EXPECT_EQ(ack["ack"], "record_start");
  EXPECT_TRUE(ack["ok"].get<bool>());
  c.send({{"keys", {{right ? "right" : "left", true}}}});
  json last;
  for (int i = 0; i < 10; ++i) last = c.frame();
  EXPECT_TRUE(last["recording"].get<bool>());
  EXPECT_GT(last["t"].get<int>(), f0["t"].get<int>());
  EXPECT_GT((right ? 1 : -1) * (last["ego"][0].get<double>() - x0), 0.0);

  c.send_raw("{oops");
  EXPECT_TRUE(c.reply().contains("error"));

  const fs::path p = scratch("served.playlog");
  c.send({{"cmd", "save"}, {"path", p.string()}});
  const json saved = c.reply();
  ASSERT_TRUE(saved["ok"].get<bool>()) << saved;
  EXPECT_GT(saved["steps"].get<int>(), 2);
  EXPECT_EQ(read_bytes(p).substr(0, 8), "PLAYLOG1");
  const playlog::PlayLog log = playlog::load(p.string());
  EXPECT_TRUE(playlog::validate(log).ok);
  EXPECT_EQ(log.total_steps(), saved["steps"].get<std::int64_t>());
  EXPECT_FALSE(c.frame()["recording"].get<bool>());
}

TEST(TeleopServer, PlainHttpGetsInfoPage) {
  ServerFixture f(13);
  net::io_context ioc;
  tcp::socket sock(ioc);
  tcp::resolver r(ioc);
  net::connect(sock, r.resolve("127.0.0.1", std::to_string(f.server.port())));
  http::request<http::empty_body> req{http::verb::get, "/", 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(sock, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(sock, buf, res);
  EXPECT_EQ(res.result(), http::status::ok);
  EXPECT_NE(res.body().find("websocket"), std::string::npos);
}

TEST(TeleopServer, TwoClientsShareOneWorld) {
  ServerFixture f(14);
  Client a(f.server.port()), b(f.server.port());
  a.send({{"cmd", "reset"}});
  EXPECT_EQ(a.reply()["ack"], "reset");
  const json fa = a.frame(), fb = b.frame();
  EXPECT_NEAR(fa["t"].get<double>(), fb["t"].get<double>(), 3);
}
