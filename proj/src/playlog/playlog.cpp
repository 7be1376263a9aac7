#include "plato/playlog/playlog.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <iterator>

#include "plato/common/binary_io.hpp"
#include "plato/common/error.hpp"
#include "plato/common/json_fields.hpp"
#include "plato/common/rng.hpp"

namespace plato::playlog {

using nlohmann::json;

Eigen::VectorXf Episode::state(int t) const {
  Eigen::VectorXf s(robot.cols() + object.cols());
  s << robot.row(t).transpose(), object.row(t).transpose();
  return s;
}

PlayLog PlayLog::for_world(const sim::WorldConfig& config, std::string source) {
  PlayLog log;
  const sim::ObservationLayout lay{config.n_blocks};
  log.manifest.dims = Dims{lay.robot_dim(), lay.object_dim(), 3};
  log.manifest.dt = config.control_dt();
  log.manifest.config_hash = config.hash();
  log.manifest.world_config = config;
  log.manifest.source = std::move(source);
  return log;
}

std::int64_t PlayLog::total_steps() const {
  std::int64_t n = 0;
  for (auto l : manifest.lengths) n += l;
  return n;
}

void append_episode(PlayLog& log, Episode episode, std::optional<std::uint64_t> seed) {
  const Dims& d = log.manifest.dims;
  const auto L = static_cast<Eigen::Index>(episode.contact.size());
  auto check = [&](const RowMatrixF& m, int cols, const char* name) {
    if (m.rows() != L || m.cols() != cols) {
      throw InputError(std::string("append_episode: ") + name + " is " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()) + ", expected " + std::to_string(L) + "x" + std::to_string(cols));
    }
  };
  check(episode.robot, d.robot, "robot_state");
  check(episode.object, d.object, "object_state");
  check(episode.action, d.action, "action");
  if (L < 2) throw InputError("append_episode: episode length " + std::to_string(L) + " < 2");
  // The seed table is only kept while every episode has a seed.
  if (seed && log.manifest.episode_seeds.size() == log.episodes.size()) {
    log.manifest.episode_seeds.push_back(*seed);
  } else {
    log.manifest.episode_seeds.clear();
  }
  log.manifest.lengths.push_back(L);
  log.episodes.push_back(std::move(episode));
}

namespace {

json manifest_json(const Manifest& m) {
  json j;
  j["format"] = "PLAYLOG1";
  j["version"] = kVersion;
  j["dims"] = {{"robot", m.dims.robot}, {"object", m.dims.object}, {"action", m.dims.action}};
  j["fields"] = {"robot_state", "object_state", "action", "contact"};
  j["dt"] = m.dt;
  j["config_hash"] = m.config_hash;
  j["world_config"] = m.world_config;
  j["source"] = m.source;
  j["lengths"] = m.lengths;
  j["episode_seeds"] = m.episode_seeds;
  return j;
}

Manifest parse_manifest(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, std::string("playlog manifest: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kVersion) {
      throw FormatError(FormatError::Kind::kVersion,
                        "playlog version " + std::to_string(j.at("version").get<int>()) + " != " +
                            std::to_string(kVersion));
    }
    Manifest m;
    const auto& d = j.at("dims");
    m.dims = Dims{d.at("robot").get<int>(), d.at("object").get<int>(), d.at("action").get<int>()};
    if (m.dims.robot <= 0 || m.dims.object <= 0 || m.dims.action != 3) {
      throw FormatError(FormatError::Kind::kDimMismatch, "playlog dims are not (robot>0, object>0, action=3)");
    }
    m.dt = j.at("dt").get<double>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.world_config = j.at("world_config");
    m.source = j.at("source").get<std::string>();
    m.lengths = j.at("lengths").get<std::vector<std::int64_t>>();
    m.episode_seeds = j.at("episode_seeds").get<std::vector<std::uint64_t>>();
    for (auto l : m.lengths) {
      if (l < 0) throw FormatError(FormatError::Kind::kMalformed, "negative episode length");
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, std::string("playlog manifest: ") + e.what());
  }
}

void write_episode(ByteWriter& w, const Episode& ep) {
  for (int t = 0; t < ep.length(); ++t) {
    for (Eigen::Index k = 0; k < ep.robot.cols(); ++k) w.f32(ep.robot(t, k));
    for (Eigen::Index k = 0; k < ep.object.cols(); ++k) w.f32(ep.object(t, k));
    for (Eigen::Index k = 0; k < ep.action.cols(); ++k) w.f32(ep.action(t, k));
    w.u8(ep.contact[static_cast<std::size_t>(t)]);
  }
}

Episode read_episode(const std::uint8_t* data, std::size_t size, int length, const Dims& d, std::size_t index) {
  if (size < static_cast<std::size_t>(length) * static_cast<std::size_t>(d.record_bytes())) {
    throw FormatError(FormatError::Kind::kTruncated, "playlog truncated in episode " + std::to_string(index));
  }
  ByteReader r(data, size);
  Episode ep(length, d);
  for (int t = 0; t < length; ++t) {
    for (int k = 0; k < d.robot; ++k) ep.robot(t, k) = r.f32();
    for (int k = 0; k < d.object; ++k) ep.object(t, k) = r.f32();
    for (int k = 0; k < d.action; ++k) ep.action(t, k) = r.f32();
    ep.contact[static_cast<std::size_t>(t)] = r.u8();
  }
  return ep;
}

std::size_t header_size(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(FormatError::Kind::kMagic, "not a PLAYLOG1 file (bad magic)");
  }
  if (bytes.size() < sizeof kMagic + 4) throw FormatError(FormatError::Kind::kTruncated, "playlog header truncated");
  std::uint32_t n;
  std::memcpy(&n, bytes.data() + sizeof kMagic, 4);
  if (bytes.size() < sizeof kMagic + 4 + n) {
    throw FormatError(FormatError::Kind::kTruncated, "playlog manifest truncated");
  }
  return n;
}

}  // namespace

std::vector<std::uint8_t> serialize(const PlayLog& log) {
  ByteWriter w;
  w.bytes(std::string_view(kMagic, sizeof kMagic));
  w.str(manifest_json(log.manifest).dump());
  for (const auto& ep : log.episodes) write_episode(w, ep);
  return w.take();
}

PlayLog deserialize(const std::vector<std::uint8_t>& bytes) {
  const std::size_t n = header_size(bytes);
  PlayLog log;
  log.manifest = parse_manifest(std::string(reinterpret_cast<const char*>(bytes.data() + 12), n));
  std::size_t pos = 12 + n;
  const Dims& d = log.manifest.dims;
  for (std::size_t e = 0; e < log.manifest.lengths.size(); ++e) {
    const int len = static_cast<int>(log.manifest.lengths[e]);
    log.episodes.push_back(read_episode(bytes.data() + pos, bytes.size() - pos, len, d, e));
    pos += static_cast<std::size_t>(len) * static_cast<std::size_t>(d.record_bytes());
  }
  if (pos != bytes.size()) {
    throw FormatError(FormatError::Kind::kMalformed,
                      "playlog payload has " + std::to_string(bytes.size() - pos) + " trailing bytes");
  }
  return log;
}

void save(const PlayLog& log, const std::string& path) {
  const auto bytes = serialize(log);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::kIo, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::kIo, "write failed: " + path);
}

PlayLog load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

Reader::Reader(const std::string& path) : in_(path, std::ios::binary) {
  if (!in_) throw FormatError(FormatError::Kind::kIo, "cannot open " + path);
  std::vector<std::uint8_t> head(12);
  in_.read(reinterpret_cast<char*>(head.data()), 12);
  head.resize(static_cast<std::size_t>(in_.gcount()));
  if (head.size() < sizeof kMagic || std::memcmp(head.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(FormatError::Kind::kMagic, "not a PLAYLOG1 file (bad magic)");
  }
  if (head.size() < 12) throw FormatError(FormatError::Kind::kTruncated, "playlog header truncated");
  std::uint32_t n;
  std::memcpy(&n, head.data() + 8, 4);
  std::string text(n, '\0');
  in_.read(text.data(), n);
  if (static_cast<std::uint32_t>(in_.gcount()) != n) {
    throw FormatError(FormatError::Kind::kTruncated, "playlog manifest truncated");
  }
  manifest_ = parse_manifest(text);
  std::uint64_t off = 12 + n;
  for (auto l : manifest_.lengths) {
    offsets_.push_back(off);
    off += static_cast<std::uint64_t>(l) * static_cast<std::uint64_t>(manifest_.dims.record_bytes());
  }
}

Episode Reader::read(std::size_t index) {
  if (index >= offsets_.size()) throw InputError("episode index " + std::to_string(index) + " out of range");
  const int len = static_cast<int>(manifest_.lengths[index]);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(len) * static_cast<std::size_t>(manifest_.dims.record_bytes()));
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(offsets_[index]));
  in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  buf.resize(static_cast<std::size_t>(in_.gcount()));
  return read_episode(buf.data(), buf.size(), len, manifest_.dims, index);
}

ValidationReport validate(const PlayLog& log) {
  ValidationReport rep;
  auto fail = [&](std::int64_t e, std::int64_t t, std::string field, std::string msg) {
    rep = ValidationReport{false, e, t, std::move(field), std::move(msg)};
    return rep;
  };
  const Manifest& m = log.manifest;
  if (m.lengths.size() != log.episodes.size()) {
    return fail(-1, -1, "lengths", "index table has " + std::to_string(m.lengths.size()) + " entries for " +
                                       std::to_string(log.episodes.size()) + " episodes");
  }
  try {
    const sim::WorldConfig cfg = m.world_config.get<sim::WorldConfig>();
    if (cfg.hash() != m.config_hash) return fail(-1, -1, "config_hash", "does not match world_config");
  } catch (const std::exception& e) {
    return fail(-1, -1, "world_config", e.what());
  }
  for (std::size_t e = 0; e < log.episodes.size(); ++e) {
    const auto ei = static_cast<std::int64_t>(e);
    const Episode& ep = log.episodes[e];
    if (ep.length() != m.lengths[e]) return fail(ei, -1, "lengths", "episode length differs from index table");
    if (ep.length() < 2) return fail(ei, -1, "lengths", "episode shorter than 2 steps");
    if (ep.robot.cols() != m.dims.robot || ep.object.cols() != m.dims.object || ep.action.cols() != m.dims.action ||
        ep.robot.rows() != ep.length() || ep.object.rows() != ep.length() || ep.action.rows() != ep.length()) {
      return fail(ei, -1, "dims", "field dims differ from manifest");
    }
    for (int t = 0; t < ep.length(); ++t) {
      for (Eigen::Index k = 0; k < ep.robot.cols(); ++k) {
        if (!std::isfinite(ep.robot(t, k))) return fail(ei, t, "robot_state[" + std::to_string(k) + "]", "non-finite");
      }
      for (Eigen::Index k = 0; k < ep.object.cols(); ++k) {
        if (!std::isfinite(ep.object(t, k))) return fail(ei, t, "object_state[" + std::to_string(k) + "]", "non-finite");
      }
      for (Eigen::Index k = 0; k < ep.action.cols(); ++k) {
        if (!std::isfinite(ep.action(t, k))) return fail(ei, t, "action[" + std::to_string(k) + "]", "non-finite");
      }
      const float g = ep.action(t, 2);
      if (g != 0.0f && g != 1.0f) return fail(ei, t, "action[2]", "range: grab must be 0 or 1");
      if (ep.contact[static_cast<std::size_t>(t)] > 1) return fail(ei, t, "contact", "range: contact byte must be 0 or 1");
    }
  }
  return rep;
}

void export_csv(const PlayLog& log, std::ostream& out) {
  const Dims& d = log.manifest.dims;
  out << "episode,step";
  for (int k = 0; k < d.robot; ++k) out << ",r" << k;
  for (int k = 0; k < d.object; ++k) out << ",o" << k;
  out << ",target_x,target_y,grab,contact\n";
  out.precision(9);
  for (std::size_t e = 0; e < log.episodes.size(); ++e) {
    const Episode& ep = log.episodes[e];
    for (int t = 0; t < ep.length(); ++t) {
      out << e << ',' << t;
      for (Eigen::Index k = 0; k < ep.robot.cols(); ++k) out << ',' << ep.robot(t, k);
      for (Eigen::Index k = 0; k < ep.object.cols(); ++k) out << ',' << ep.object(t, k);
      for (Eigen::Index k = 0; k < ep.action.cols(); ++k) out << ',' << ep.action(t, k);
      out << ',' << static_cast<int>(ep.contact[static_cast<std::size_t>(t)]) << '\n';
    }
  }
}

std::string labels_path(const std::string& log_path) {
  std::filesystem::path p(log_path);
  p.replace_extension(".labels.json");
  return p.string();
}

void save_labels(const std::vector<EpisodeLabels>& labels, const std::string& path) {
  json eps = json::array();
  for (const auto& ep : labels) {
    json arr = json::array();
    for (const auto& l : ep) {
      arr.push_back({{"kind", primitives::to_string(l.kind)}, {"start_step", l.start_step}, {"end_step", l.end_step}});
    }
    eps.push_back(std::move(arr));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::kIo, "cannot open " + path + " for writing");
  out << json{{"episodes", eps}}.dump(1) << '\n';
  if (!out) throw FormatError(FormatError::Kind::kIo, "write failed: " + path);
}

std::vector<EpisodeLabels> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot open " + path);
  std::vector<EpisodeLabels> out;
  try {
    const json j = json::parse(in);
    for (const auto& ep : j.at("episodes")) {
      EpisodeLabels labels;
      for (const auto& l : ep) {
        labels.push_back({primitives::kind_from_string(l.at("kind").get<std::string>()),
                          l.at("start_step").get<std::int64_t>(), l.at("end_step").get<std::int64_t>()});
      }
      out.push_back(std::move(labels));
    }
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, path + ": " + e.what());
  }
  return out;
}

void to_json(json& j, const GenerateConfig& c) {
  json w = json::object();
  for (std::size_t k = 0; k < primitives::kNumKinds; ++k) w[std::string(primitives::to_string(primitives::kAllKinds[k]))] = c.weights[k];
  j = json{{"world", c.world}, {"ranges", c.ranges}, {"weights", w}, {"max_episode_steps", c.max_episode_steps}};
}

void from_json(const json& j, GenerateConfig& c) {
  StrictObject o(j, "collect");
  o.get("world", c.world);
  o.get("ranges", c.ranges);
  if (const json* w = o.sub("weights")) {
    StrictObject wo(*w, "collect.weights");
    for (std::size_t k = 0; k < primitives::kNumKinds; ++k) {
      wo.get(std::string(primitives::to_string(primitives::kAllKinds[k])), c.weights[k]);
    }
    wo.finish();
  }
  o.get("max_episode_steps", c.max_episode_steps);
  o.finish();
  if (c.max_episode_steps < 2) throw ConfigError("collect.max_episode_steps must be >= 2");
}

sim::Action quantized(const sim::Action& a) {
  sim::Action q;
  q.target_position.x() = static_cast<float>(a.target_position.x());
  q.target_position.y() = static_cast<float>(a.target_position.y());
  q.grab = a.grab;
  return q;
}

void record_step(Episode& ep, int t, const Eigen::VectorXd& obs, int robot_dim, const sim::Action& action, bool contact) {
  ep.robot.row(t) = obs.head(robot_dim).cast<float>().transpose();
  ep.object.row(t) = obs.tail(obs.size() - robot_dim).cast<float>().transpose();
  ep.action(t, 0) = static_cast<float>(action.target_position.x());
  ep.action(t, 1) = static_cast<float>(action.target_position.y());
  ep.action(t, 2) = action.grab ? 1.0f : 0.0f;
  ep.contact[static_cast<std::size_t>(t)] = contact ? 1 : 0;
}

GeneratedPlay generate_play(const GenerateConfig& config, std::uint64_t seed, std::int64_t duration_steps) {
  GeneratedPlay out;
  out.log = PlayLog::for_world(config.world);
  const Dims d = out.log.manifest.dims;
  std::int64_t left = duration_steps;
  for (std::uint64_t e = 0; left >= 2; ++e) {
    const int len = static_cast<int>(std::min<std::int64_t>(left, config.max_episode_steps));
    left -= len;
    const std::uint64_t world_seed = derive_seed(seed, 2 * e);
    sim::World world(config.world, world_seed);
    Rng rng(derive_seed(seed, 2 * e + 1));
    Episode ep(len, d);
    EpisodeLabels labels;
    std::optional<primitives::PrimitiveController> ctl;
    for (int t = 0; t < len; ++t) {
      if (!ctl || ctl->phase() == primitives::ScriptPhase::kDone) {
        if (!labels.empty()) labels.back().end_step = t - 1;
        ctl.emplace(primitives::sample_primitive(rng, world, config.weights, config.ranges), config.world);
        labels.push_back({ctl->spec().kind, t, len - 1});
      }
      const Eigen::VectorXd obs = world.observe();
      const bool contact = world.state().contact;
      const sim::Action a = quantized(ctl->step(world).action);
      record_step(ep, t, obs, d.robot, a, contact);
      world.step(a);
    }
    append_episode(out.log, std::move(ep), world_seed);
    out.labels.push_back(std::move(labels));
  }
  return out;
}

std::int64_t replay_mismatch(const PlayLog& log, std::size_t index) {
  if (index >= log.episodes.size()) throw InputError("episode index " + std::to_string(index) + " out of range");
  if (log.manifest.episode_seeds.size() != log.episodes.size()) {
    throw DataError("log has no per-episode world seeds; replay needs a generated log");
  }
  const sim::WorldConfig cfg = log.manifest.world_config.get<sim::WorldConfig>();
  sim::World world(cfg, log.manifest.episode_seeds[index]);
  const Episode& ep = log.episodes[index];
  const int dr = log.manifest.dims.robot;
  for (int t = 0; t < ep.length(); ++t) {
    const Eigen::VectorXf obs = world.observe().cast<float>();
    if (obs.head(dr) != ep.robot.row(t).transpose() || obs.tail(obs.size() - dr) != ep.object.row(t).transpose() ||
        (world.state().contact ? 1 : 0) != ep.contact[static_cast<std::size_t>(t)]) {
      return t;
    }
    sim::Action a;
    a.target_position = sim::Vec2(static_cast<double>(ep.action(t, 0)), static_cast<double>(ep.action(t, 1)));
    a.grab = ep.action(t, 2) != 0.0f;
    world.step(a);
  }
  return -1;
}

}  // namespace plato::playlog
