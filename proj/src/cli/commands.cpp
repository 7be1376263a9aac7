#include "plato/cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>

#include "plato/cli/teleop.hpp"
#include "plato/common/error.hpp"

namespace plato::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const std::string& path) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream f(path);
  if (!f) throw FormatError(FormatError::Kind::kIo, "cannot write " + path);
  return f;
}

void write_json(const json& j, const std::string& path) { open_out(path) << j.dump(2) << '\n'; }

playlog::PlayLog load_log(const std::string& path) {
  if (path.empty()) throw ConfigError("no dataset given (--data or paths.data)");
  playlog::PlayLog log = playlog::load(path);
  const playlog::ValidationReport v = playlog::validate(log);
  if (!v.ok) {
    throw DataError(path + ": episode " + std::to_string(v.episode) + " step " + std::to_string(v.step) + " " +
                    v.field + ": " + v.message);
  }
  return log;
}

std::string or_default(const std::string& given, const std::string& fallback, const char* what) {
  if (!given.empty()) return given;
  if (!fallback.empty()) return fallback;
  throw ConfigError(std::string("missing ") + what);
}

json table_json(const eval::SuccessTable& t, const RunConfig& cfg) {
  json cells = json::array();
  for (const auto& c : t.cells) {
    cells.push_back({{"method", c.method},
                     {"primitive", std::string(primitives::to_string(c.primitive))},
                     {"mean", c.mean},
                     {"std_err", c.std_err},
                     {"seeds", c.seeds}});
  }
  json avg = json::object();
  for (const auto& m : t.methods) avg[m] = t.average(m);
  return {{"config_hash", cfg.hash()},
          {"world_hash", cfg.collect.world.hash()},
          {"eval_seed", cfg.seeds.eval},
          {"episodes", cfg.eval.episodes},
          {"cells", cells},
          {"average", avg},
          {"absent", t.absent}};
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const InputError*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  return 1;
}

void check_world_hash(const json& header, const sim::WorldConfig& world, const std::string& path, bool force,
                      std::ostream& out) {
  const std::string want = world.hash();
  const std::string got = header.value("world_hash", std::string());
  if (got == want) return;
  const std::string msg = path + " was trained on world config " + (got.empty() ? "<unknown>" : got) +
                          ", evaluating on " + want;
  if (!force) throw ConfigError(msg + " (use --force to override)");
  out << "warning: " << msg << '\n';
}

// ---- collect ----

void collect(const RunConfig& cfg, const CollectArgs& a, std::ostream& out) {
  const std::string path = or_default(a.out, cfg.paths.data, "output path (--out)");
  const int n = a.episodes.value_or(cfg.episodes);
  if (n < 1) throw ConfigError("--episodes must be >= 1");
  const std::uint64_t seed = a.seed.value_or(cfg.seeds.collect);
  const playlog::GeneratedPlay gp =
      playlog::generate_play(cfg.collect, seed, static_cast<std::int64_t>(n) * cfg.collect.max_episode_steps);
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  playlog::save(gp.log, path);
  playlog::save_labels(gp.labels, playlog::labels_path(path));
  const segment::SegmentStats s = segment::segment_stats(gp.log, cfg.smoothing);
  out << "wrote " << path << ": " << gp.log.size() << " episodes, " << gp.log.total_steps() << " steps ("
      << std::fixed << std::setprecision(1) << gp.log.total_steps() * gp.log.manifest.dt / 60.0
      << " min simulated), seed " << seed << ", world " << gp.log.manifest.config_hash << '\n';
  segment::write_stats_text(s, out);
}

// ---- train ----

void train(const RunConfig& cfg, const TrainArgs& a, std::ostream& out) {
  const std::string data = or_default(a.data, cfg.paths.data, "dataset (--data)");
  const std::string ckpt = or_default(a.out, cfg.paths.checkpoint, "checkpoint path (--out)");
  const models::Variant v = a.variant.value_or(cfg.variant);
  const std::uint64_t seed = a.seed.value_or(cfg.seeds.train);
  const models::ModelConfig mc = cfg.model_for(v);
  const playlog::PlayLog log = load_log(data);

  const std::string metrics_path = a.metrics.empty() ? ckpt + ".metrics.csv" : a.metrics;
  std::ofstream metrics = open_out(metrics_path);
  models::TrainOptions opt;
  opt.seed = seed;
  opt.smoothing = cfg.smoothing;
  opt.metrics = &metrics;
  if (a.progress_every > 0) {
    opt.progress = [&](int step, const models::LossParts& p) {
      if (step % a.progress_every == 0 || step + 1 == mc.steps) {
        out << "step " << step << " total " << p.total << " L_int " << p.L_int << " L_pre " << p.L_pre << " KL "
            << p.KL << '\n';
      }
    };
  }
  models::TrainResult r = models::train(log, mc, v, opt);
  if (const fs::path parent = fs::path(ckpt).parent_path(); !parent.empty()) fs::create_directories(parent);
  models::save_bundle(r.model, ckpt,
                      {{"seed", seed},
                       {"world_hash", log.manifest.config_hash},
                       {"config_hash", cfg.hash()},
                       {"data", data}});
  out << "wrote " << ckpt << " (" << models::to_string(v) << ", seed " << seed << ", " << mc.steps
      << " steps), metrics " << metrics_path << '\n';
}

// ---- eval ----

eval::SuccessTable evaluate(const RunConfig& cfg, const EvalArgs& a, std::ostream& out) {
  std::vector<std::string> paths = a.checkpoints;
  if (paths.empty() && !cfg.paths.checkpoint.empty()) paths.push_back(cfg.paths.checkpoint);
  if (paths.empty()) throw ConfigError("no checkpoints given");
  if (a.jobs < 1) throw ConfigError("--jobs must be >= 1");
  std::vector<eval::CheckpointEntry> entries;
  for (const auto& p : paths) {
    eval::CheckpointEntry e{fs::path(p).stem().string(), 0, p};
    if (fs::exists(p)) {
      const tensor::Checkpoint ck = tensor::load_checkpoint(p);
      check_world_hash(ck.header, cfg.collect.world, p, a.force, out);
      e.method = ck.header.value("variant", e.method);
      e.seed = ck.header.value("seed", 0);
    }
    entries.push_back(e);
  }
  std::vector<eval::ResultRow> rows;
  const eval::SuccessTable t = eval::evaluate(entries, cfg.collect.world, cfg.eval_options(a.jobs), &rows);
  eval::write_table(t, out);
  for (const auto& m : t.absent) out << "absent: " << m << '\n';
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    auto csv = open_out((fs::path(a.out_dir) / "results.csv").string());
    eval::write_results_csv(rows, csv);
    auto txt = open_out((fs::path(a.out_dir) / "table.txt").string());
    txt << "# config_hash=" << cfg.hash() << " world_hash=" << cfg.collect.world.hash() << '\n';
    eval::write_table(t, txt);
    write_json(table_json(t, cfg), (fs::path(a.out_dir) / "table.json").string());
  }
  return t;
}

// ---- segment-stats ----

segment::SegmentStats segment_stats(const RunConfig& cfg, const SegmentStatsArgs& a, std::ostream& out) {
  const playlog::PlayLog log = load_log(or_default(a.data, cfg.paths.data, "dataset (--data)"));
  const segment::SegmentStats s = segment::segment_stats(log, cfg.smoothing);
  segment::write_stats_text(s, out);
  if (!a.csv.empty()) {
    auto f = open_out(a.csv);
    segment::write_stats_csv(s, f);
  }
  return s;
}

// ---- ablate-contact ----

segment::InjectionReport ablate_contact(const RunConfig& cfg, const AblateArgs& a, std::ostream& out) {
  if (!(a.pct >= 0 && a.pct < 100)) throw ConfigError("--pct must be in [0, 100)");
  const std::string data = or_default(a.data, cfg.paths.data, "dataset (--data)");
  const std::string dir = or_default(a.out_dir, cfg.paths.output, "output directory (--out)");
  playlog::PlayLog log = load_log(data);
  std::vector<segment::ContactSeq> contacts;
  for (const auto& ep : log.episodes) contacts.push_back(ep.contact);
  const std::uint64_t seed = a.seed.value_or(cfg.seeds.train);
  Rng rng(derive_seed(seed, 0xfc));
  const segment::InjectionReport rep = segment::inject_false_contacts(contacts, rng, a.pct, cfg.smoothing);
  for (std::size_t e = 0; e < contacts.size(); ++e) log.episodes[e].contact = contacts[e];
  log.manifest.source = "scripted+false_contacts";

  fs::create_directories(dir);
  const std::string corrupted = (fs::path(dir) / "corrupted.playlog").string();
  playlog::save(log, corrupted);
  out << "false interactions " << rep.false_interactions << " / " << rep.true_interactions + rep.false_interactions
      << ", achieved pct " << std::fixed << std::setprecision(2) << rep.achieved_pct << " (target " << a.pct
      << ")" << (rep.reached ? "" : ", target not reached: no free space left") << '\n';
  json report{{"target_pct", a.pct},
              {"achieved_pct", rep.achieved_pct},
              {"true_interactions", rep.true_interactions},
              {"false_interactions", rep.false_interactions},
              {"reached", rep.reached},
              {"seed", seed},
              {"data", data},
              {"config_hash", cfg.hash()}};

  if (a.train) {
    TrainArgs t;
    t.data = corrupted;
    t.out = (fs::path(dir) / "plato_fc.ckpt").string();
    t.variant = models::Variant::kPLATO;
    t.seed = seed;
    train(cfg, t, out);
    report["checkpoint"] = t.out;
  }
  write_json(report, (fs::path(dir) / "ablation.json").string());
  return rep;
}

// ---- export-latents ----

void export_latents(const RunConfig& cfg, const ExportLatentsArgs& a, std::ostream& out) {
  const std::string ckpt = or_default(a.checkpoint, cfg.paths.checkpoint, "checkpoint (--checkpoint)");
  json header;
  models::Bundle b = models::load_bundle(ckpt, &header);
  check_world_hash(header, cfg.collect.world, ckpt, a.force, out);
  const auto rows = eval::export_latents(b, cfg.collect.world, cfg.eval_options());
  const std::string path = a.out.empty() ? ckpt + ".latents.csv" : a.out;
  auto f = open_out(path);
  eval::write_latents_csv(rows, f);
  out << "wrote " << rows.size() << " latents to " << path << '\n';
}

// ---- replay ----

void replay(const ReplayArgs& a, std::ostream& out) {
  const playlog::PlayLog log = playlog::load(a.data);
  std::vector<std::size_t> which;
  if (a.episode) {
    if (*a.episode < 0 || static_cast<std::size_t>(*a.episode) >= log.size()) {
      throw InputError("episode " + std::to_string(*a.episode) + " out of range [0, " + std::to_string(log.size()) +
                       ")");
    }
    which.push_back(static_cast<std::size_t>(*a.episode));
  } else {
    for (std::size_t e = 0; e < log.size(); ++e) which.push_back(e);
  }
  std::size_t matched = 0;
  std::int64_t steps = 0;
  for (const std::size_t e : which) {
    const std::int64_t bad = playlog::replay_mismatch(log, e);
    if (bad < 0) {
      ++matched;
      steps += log.episodes[e].length();
    } else {
      out << "episode " << e << ": first mismatch at step " << bad << '\n';
    }
  }
  out << "replayed " << which.size() << " episodes, " << matched << " bit-identical (" << std::fixed
      << std::setprecision(1) << 100.0 * matched / which.size() << "%), " << steps << " steps matched\n";
  if (matched != which.size()) throw DataError("replay diverged from the log");
}

// ---- teleop-serve ----

void teleop_serve(const RunConfig& cfg, const TeleopArgs& a, std::ostream& out) {
  TeleopServerOptions opt;
  opt.address = a.address;
  opt.port = a.port;
  opt.render_hz = a.render_hz;
  opt.handle_signals = true;
  TeleopServer server(cfg.collect.world, a.seed.value_or(cfg.seeds.collect), opt);
  out << "teleop server on ws://" << a.address << ':' << server.port() << " (" << a.render_hz << " Hz frames)"
      << std::endl;
  server.run();
  out << "teleop server stopped\n";
}

}  // namespace plato::cli
