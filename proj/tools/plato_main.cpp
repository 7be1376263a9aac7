// plato: command-line entry point. Every subcommand takes --config FILE plus
// dot-path overrides such as --model.beta 1e-3 or --world.n_blocks 2.
#include <iostream>

#include <CLI11.hpp>

#include "plato/cli/commands.hpp"
#include "plato/common/error.hpp"

using namespace plato;
using namespace plato::cli;

namespace {

struct Common {
  std::string config;
};

void add_config(CLI::App* sub, Common& c) {
  sub->add_option("--config,-c", c.config, "run config JSON (defaults when omitted)");
  sub->allow_extras();
}

RunConfig load(CLI::App* sub, const Common& c, std::vector<std::pair<std::string, std::string>> extra = {}) {
  auto ov = parse_overrides(sub->remaining());
  ov.insert(ov.end(), extra.begin(), extra.end());
  return load_run_config(c.config, ov);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plato: learning from play in a 2D block world"};
  app.require_subcommand(1);

  Common common;

  CollectArgs collect_a;
  std::uint64_t collect_seed = 0;
  int collect_eps = 0;
  auto* collect_cmd = app.add_subcommand("collect", "generate scripted play");
  add_config(collect_cmd, common);
  auto* collect_seed_opt = collect_cmd->add_option("--seed", collect_seed);
  auto* collect_eps_opt = collect_cmd->add_option("--episodes", collect_eps);
  collect_cmd->add_option("--out", collect_a.out, "PLAYLOG1 output path");

  TrainArgs train_a;
  std::string train_variant;
  std::uint64_t train_seed = 0;
  std::string train_beta, train_steps;
  auto* train_cmd = app.add_subcommand("train", "train one variant");
  add_config(train_cmd, common);
  train_cmd->add_option("--data", train_a.data);
  train_cmd->add_option("--variant", train_variant, "PLATO, PLATO_PRE, PLATO_R, LMP, GCBC");
  auto* train_seed_opt = train_cmd->add_option("--seed", train_seed);
  train_cmd->add_option("--out", train_a.out, "checkpoint path");
  train_cmd->add_option("--metrics", train_a.metrics, "metrics CSV (default <out>.metrics.csv)");
  train_cmd->add_option("--beta", train_beta, "shorthand for --model.beta");
  train_cmd->add_option("--steps", train_steps, "shorthand for --model.steps");
  train_cmd->add_option("--progress-every", train_a.progress_every);

  EvalArgs eval_a;
  int eval_episodes = 0;
  std::uint64_t eval_seed = 0;
  std::vector<std::string> eval_prims;
  auto* eval_cmd = app.add_subcommand("eval", "success rates for checkpoints");
  add_config(eval_cmd, common);
  eval_cmd->add_option("--checkpoint,--ckpt", eval_a.checkpoints, "checkpoint files")->expected(1, -1);
  eval_cmd->add_option("--out", eval_a.out_dir, "directory for results.csv, table.txt, table.json");
  eval_cmd->add_option("--jobs,-j", eval_a.jobs);
  eval_cmd->add_flag("--force", eval_a.force, "accept a world config hash mismatch");
  auto* eval_eps_opt = eval_cmd->add_option("--episodes", eval_episodes);
  auto* eval_seed_opt = eval_cmd->add_option("--eval-seed", eval_seed);
  eval_cmd->add_option("--primitives", eval_prims)->expected(1, -1);

  SegmentStatsArgs stats_a;
  auto* stats_cmd = app.add_subcommand("segment-stats", "interaction statistics of a log");
  add_config(stats_cmd, common);
  stats_cmd->add_option("--data", stats_a.data);
  stats_cmd->add_option("--csv", stats_a.csv, "length histogram CSV");

  AblateArgs ablate_a;
  std::uint64_t ablate_seed = 0;
  bool ablate_no_train = false;
  auto* ablate_cmd = app.add_subcommand("ablate-contact", "inject false contacts and retrain PLATO");
  add_config(ablate_cmd, common);
  ablate_cmd->add_option("--data", ablate_a.data);
  ablate_cmd->add_option("--pct", ablate_a.pct, "target share of false interactions, percent");
  ablate_cmd->add_option("--out", ablate_a.out_dir, "output directory");
  auto* ablate_seed_opt = ablate_cmd->add_option("--seed", ablate_seed);
  ablate_cmd->add_flag("--no-train", ablate_no_train, "only corrupt the log");

  ExportLatentsArgs lat_a;
  auto* lat_cmd = app.add_subcommand("export-latents", "prior latents of eval goals as CSV");
  add_config(lat_cmd, common);
  lat_cmd->add_option("--checkpoint,--ckpt", lat_a.checkpoint);
  lat_cmd->add_option("--out", lat_a.out);
  lat_cmd->add_flag("--force", lat_a.force);

  ReplayArgs replay_a;
  int replay_ep = -1;
  auto* replay_cmd = app.add_subcommand("replay", "re-simulate a log and check bit equality");
  replay_cmd->add_option("--data", replay_a.data)->required();
  auto* replay_ep_opt = replay_cmd->add_option("--episode", replay_ep);

  TeleopArgs tele_a;
  std::uint64_t tele_seed = 0;
  auto* tele_cmd = app.add_subcommand("teleop-serve", "websocket server for keyboard play collection");
  add_config(tele_cmd, common);
  tele_cmd->add_option("--port", tele_a.port);
  tele_cmd->add_option("--address", tele_a.address);
  tele_cmd->add_option("--rate", tele_a.render_hz, "frame rate, Hz");
  auto* tele_seed_opt = tele_cmd->add_option("--seed", tele_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*collect_cmd) {
      if (*collect_seed_opt) collect_a.seed = collect_seed;
      if (*collect_eps_opt) collect_a.episodes = collect_eps;
      collect(load(collect_cmd, common), collect_a, std::cout);
    } else if (*train_cmd) {
      std::vector<std::pair<std::string, std::string>> extra;
      if (!train_beta.empty()) extra.emplace_back("model.beta", train_beta);
      if (!train_steps.empty()) extra.emplace_back("model.steps", train_steps);
      const RunConfig cfg = load(train_cmd, common, extra);
      if (!train_variant.empty()) train_a.variant = models::variant_from_string(train_variant);
      if (*train_seed_opt) train_a.seed = train_seed;
      train(cfg, train_a, std::cout);
    } else if (*eval_cmd) {
      std::vector<std::pair<std::string, std::string>> extra;
      if (*eval_eps_opt) extra.emplace_back("eval.episodes", std::to_string(eval_episodes));
      if (*eval_seed_opt) extra.emplace_back("seeds.eval", std::to_string(eval_seed));
      if (!eval_prims.empty()) extra.emplace_back("eval.primitives", nlohmann::json(eval_prims).dump());
      evaluate(load(eval_cmd, common, extra), eval_a, std::cout);
    } else if (*stats_cmd) {
      segment_stats(load(stats_cmd, common), stats_a, std::cout);
    } else if (*ablate_cmd) {
      if (*ablate_seed_opt) ablate_a.seed = ablate_seed;
      ablate_a.train = !ablate_no_train;
      ablate_contact(load(ablate_cmd, common), ablate_a, std::cout);
    } else if (*lat_cmd) {
      export_latents(load(lat_cmd, common), lat_a, std::cout);
    } else if (*replay_cmd) {
      if (*replay_ep_opt) replay_a.episode = replay_ep;
      replay(replay_a, std::cout);
    } else if (*tele_cmd) {
      if (*tele_seed_opt) tele_a.seed = tele_seed;
      teleop_serve(load(tele_cmd, common), tele_a, std::cout);
    }
  } catch (const std::exception& e) {
    std::cout.flush();
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
