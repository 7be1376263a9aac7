#include "plato/eval/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "plato/common/error.hpp"

namespace plato::eval {

using primitives::PrimitiveController;
using primitives::ScriptPhase;

SuccessMetric SuccessMetric::for_config(const sim::WorldConfig& w, int H_int) {
  SuccessMetric m;
  m.eps_pos = 1.5 * w.ego_radius;
  m.max_steps = 3 * H_int;
  return m;
}

void SuccessMetric::validate() const {
  if (!(eps_pos > 0) || !(eps_rot > 0)) throw ConfigError("metric tolerances must be positive");
  if (!(min_progress >= 0 && min_progress <= 1)) throw ConfigError("metric.min_progress must be in [0, 1]");
  if (max_steps < 1) throw ConfigError("metric.max_steps must be >= 1");
}

std::optional<GoalSpec> make_goal(sim::World& world, PrimitiveKind kind, Rng& rng, int max_reference_steps) {
  primitives::PrimitiveSpec spec = primitives::sample_primitive(rng, world, primitives::weights_over({kind}));
  if (spec.kind != kind || !primitives::feasible(spec, world)) return std::nullopt;
  GoalSpec g;
  g.snapshot = world.snapshot();
  g.spec = spec;
  g.start_block = world.state().blocks[static_cast<std::size_t>(spec.target_block)];
  PrimitiveController ref(spec, world.config());
  int t = 0;
  for (; t < max_reference_steps && ref.phase() != ScriptPhase::kDone; ++t) world.step(ref.step(world).action);
  const bool done = ref.phase() == ScriptPhase::kDone;
  g.reference_steps = t;
  g.goal_block = world.state().blocks[static_cast<std::size_t>(spec.target_block)];
  const Eigen::VectorXd obs = world.observe();
  g.goal_object = obs.tail(world.layout().object_dim());
  world = sim::World::restore(g.snapshot);
  if (!done) return std::nullopt;
  // A reference run that barely moved the block leaves a goal the start state already meets.
  if (is_success(g, g.start_block, SuccessMetric::for_config(world.config()))) return std::nullopt;
  return g;
}

GoalSpec episode_goal(const sim::WorldConfig& cfg, PrimitiveKind kind, std::uint64_t eval_seed, int index,
                      int* skipped) {
  const std::uint64_t base = derive_seed(derive_seed(eval_seed, 100 + static_cast<std::uint64_t>(kind)),
                                         static_cast<std::uint64_t>(index));
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    const std::uint64_t ws = derive_seed(base, attempt);
    sim::World world(cfg, ws);
    Rng rng(derive_seed(ws, 1));
    if (auto g = make_goal(world, kind, rng)) return *g;
    if (skipped) ++*skipped;
  }
  throw DataError("no feasible " + std::string(primitives::to_string(kind)) + " goal after 1000 worlds");
}

namespace {

bool rotational(PrimitiveKind k) { return k == PrimitiveKind::kTip || k == PrimitiveKind::kSideRotate; }

EvalResult score(const GoalSpec& goal, const sim::BlockState& b, bool success, int steps) {
  EvalResult r;
  r.primitive = goal.spec.kind;
  r.success = success;
  r.steps_used = steps;
  r.pos_error = (b.position - goal.goal_block.position).norm();
  r.angle_error = std::abs(sim::wrap_angle(b.angle - goal.goal_block.angle));
  return r;
}

template <typename StepFn>
EvalResult rollout(const GoalSpec& goal, const SuccessMetric& m, StepFn&& step) {
  sim::World world = sim::World::restore(goal.snapshot);
  const auto blk = [&]() -> const sim::BlockState& {
    return world.state().blocks[static_cast<std::size_t>(goal.spec.target_block)];
  };
  for (int t = 0; t < m.max_steps; ++t) {
    world.step(step(world));
    if (is_success(goal, blk(), m)) return score(goal, blk(), true, t + 1);
  }
  return score(goal, blk(), false, m.max_steps);
}

}  // namespace

bool is_success(const GoalSpec& goal, const sim::BlockState& b, const SuccessMetric& m) {
  if (rotational(goal.spec.kind)) return std::abs(sim::wrap_angle(b.angle - goal.goal_block.angle)) <= m.eps_rot;
  const sim::Vec2 gd = goal.goal_block.position - goal.start_block.position;
  const sim::Vec2 d = b.position - goal.start_block.position;
  const double gn = gd.norm();
  const double progress = d.dot(gd) / std::max(1e-9, gn);
  return (b.position - goal.goal_block.position).norm() <= m.eps_pos && progress >= m.min_progress * gn;
}

EvalResult run_episode(const ObsPolicy& policy, const GoalSpec& goal, const SuccessMetric& m) {
  return rollout(goal, m, [&](sim::World& w) { return policy(w.observe()); });
}

EvalResult run_episode(models::Bundle& bundle, const GoalSpec& goal, const SuccessMetric& m,
                       std::uint64_t noise_seed) {
  models::Actor actor(bundle, goal.goal_object, noise_seed);
  return run_episode([&](const Eigen::VectorXd& obs) { return actor.act(obs); }, goal, m);
}

EvalResult run_scripted_episode(const GoalSpec& goal, const SuccessMetric& m) {
  primitives::PrimitiveSpec spec = goal.spec;
  spec.noise_seed ^= 0x9e3779b97f4a7c15ull;
  sim::World probe = sim::World::restore(goal.snapshot);
  PrimitiveController ctl(spec, probe.config());
  return rollout(goal, m, [&](sim::World& w) { return ctl.step(w).action; });
}

// ---- tables ----

const TableCell* SuccessTable::find(const std::string& method, PrimitiveKind k) const {
  for (const auto& c : cells) {
    if (c.method == method && c.primitive == k) return &c;
  }
  return nullptr;
}

double SuccessTable::average(const std::string& method) const {
  double sum = 0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.method == method) {
      sum += c.mean;
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

SuccessTable aggregate(const std::vector<ResultRow>& rows) {
  SuccessTable t;
  // (method, primitive) -> seed -> (successes, episodes)
  std::map<std::pair<std::string, int>, std::map<int, std::pair<int, int>>> acc;
  for (const auto& r : rows) {
    if (std::find(t.methods.begin(), t.methods.end(), r.method) == t.methods.end()) t.methods.push_back(r.method);
    if (std::find(t.primitives.begin(), t.primitives.end(), r.primitive) == t.primitives.end()) {
      t.primitives.push_back(r.primitive);
    }
    auto& a = acc[{r.method, static_cast<int>(r.primitive)}][r.seed];
    a.first += r.success ? 1 : 0;
    a.second += 1;
  }
  for (const auto& m : t.methods) {
    for (const auto k : t.primitives) {
      auto it = acc.find({m, static_cast<int>(k)});
      if (it == acc.end()) continue;
      std::vector<double> rates;
      for (const auto& [seed, sn] : it->second) rates.push_back(100.0 * sn.first / sn.second);
      TableCell c;
      c.method = m;
      c.primitive = k;
      c.seeds = static_cast<int>(rates.size());
      for (double r : rates) c.mean += r;
      c.mean /= c.seeds;
      if (c.seeds > 1) {
        double ss = 0;
        for (double r : rates) ss += (r - c.mean) * (r - c.mean);
        c.std_err = std::sqrt(ss / (c.seeds - 1)) / std::sqrt(static_cast<double>(c.seeds));
      }
      t.cells.push_back(c);
    }
  }
  return t;
}

void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "method,primitive,seed,episode,success,steps\n";
  for (const auto& r : rows) {
    out << r.method << ',' << primitives::to_string(r.primitive) << ',' << r.seed << ',' << r.episode << ','
        << (r.success ? 1 : 0) << ',' << r.steps << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  if (!std::getline(in, line) || line != "method,primitive,seed,episode,success,steps") {
    throw FormatError(FormatError::Kind::kMalformed, "results.csv: unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[6];
    for (auto& x : f) {
      if (!std::getline(ss, x, ',')) throw FormatError(FormatError::Kind::kMalformed, "results.csv: short row");
    }
    ResultRow r;
    r.method = f[0];
    r.primitive = primitives::kind_from_string(f[1]);
    r.seed = std::stoi(f[2]);
    r.episode = std::stoi(f[3]);
    r.success = f[4] == "1";
    r.steps = std::stoi(f[5]);
    rows.push_back(r);
  }
  return rows;
}

void write_table(const SuccessTable& t, std::ostream& out) {
  const auto cell = [](double mean, double se) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << mean << "(" << se << ")";
    return os.str();
  };
  std::size_t w0 = 6;
  for (const auto& m : t.methods) w0 = std::max(w0, m.size());
  const int w = 14;
  out << std::left << std::setw(static_cast<int>(w0) + 2) << "method";
  for (auto k : t.primitives) out << std::setw(w) << primitives::to_string(k);
  out << "average\n";
  for (const auto& m : t.methods) {
    out << std::setw(static_cast<int>(w0) + 2) << m;
    for (auto k : t.primitives) {
      const TableCell* c = t.find(m, k);
      out << std::setw(w) << (c ? cell(c->mean, c->std_err) : std::string("absent"));
    }
    out << std::fixed << std::setprecision(1) << t.average(m) << "\n";
    out.unsetf(std::ios::floatfield);
  }
  for (const auto& a : t.absent) out << "absent: " << a << "\n";
}

// ---- evaluation ----

namespace {

std::uint64_t episode_noise_seed(std::uint64_t eval_seed, PrimitiveKind k, int index) {
  return derive_seed(derive_seed(eval_seed, 200 + static_cast<std::uint64_t>(k)), static_cast<std::uint64_t>(index));
}

template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::vector<ResultRow> evaluate_bundle(models::Bundle& bundle, const std::string& method, int seed,
                                       const sim::WorldConfig& world, const EvaluateOptions& opt) {
  opt.metric.validate();
  std::vector<ResultRow> rows;
  for (const auto k : opt.primitives) {
    std::vector<ResultRow> part(static_cast<std::size_t>(opt.n_episodes));
    parallel_for(opt.n_episodes, opt.jobs, [&](int i) {
      const GoalSpec g = episode_goal(world, k, opt.eval_seed, i);
      const EvalResult r = run_episode(bundle, g, opt.metric, episode_noise_seed(opt.eval_seed, k, i));
      part[static_cast<std::size_t>(i)] = {method, k, seed, i, r.success, r.steps_used};
    });
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

SuccessTable evaluate(const std::vector<CheckpointEntry>& entries, const sim::WorldConfig& world,
                      const EvaluateOptions& opt, std::vector<ResultRow>* rows_out) {
  std::vector<ResultRow> rows;
  std::vector<std::string> absent;
  for (const auto& e : entries) {
    if (!std::filesystem::exists(e.path)) {
      absent.push_back(e.method + " seed " + std::to_string(e.seed) + " (" + e.path + ")");
      continue;
    }
    models::Bundle b = models::load_bundle(e.path);
    auto r = evaluate_bundle(b, e.method, e.seed, world, opt);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  SuccessTable t = aggregate(rows);
  t.absent = absent;
  if (rows_out) *rows_out = std::move(rows);
  return t;
}

std::vector<LatentRow> export_latents(models::Bundle& bundle, const sim::WorldConfig& world,
                                      const EvaluateOptions& opt) {
  if (!models::has_latent(bundle.variant())) throw UsageError("export-latents: GCBC has no latent space");
  std::vector<LatentRow> rows;
  for (const auto k : opt.primitives) {
    for (int i = 0; i < opt.n_episodes; ++i) {
      const GoalSpec g = episode_goal(world, k, opt.eval_seed, i);
      models::Actor actor(bundle, g.goal_object, episode_noise_seed(opt.eval_seed, k, i));
      sim::World w = sim::World::restore(g.snapshot);
      actor.act(w.observe());
      rows.push_back({k, actor.z()});
    }
  }
  return rows;
}

void write_latents_csv(const std::vector<LatentRow>& rows, std::ostream& out) {
  const Eigen::Index d = rows.empty() ? 0 : rows.front().z.size();
  out << "label";
  for (Eigen::Index i = 0; i < d; ++i) out << ",z" << i;
  out << '\n' << std::setprecision(9);
  for (const auto& r : rows) {
    out << primitives::to_string(r.label);
    for (Eigen::Index i = 0; i < r.z.size(); ++i) out << ',' << r.z[i];
    out << '\n';
  }
}

}  // namespace plato::eval
