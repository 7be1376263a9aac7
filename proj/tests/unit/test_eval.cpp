#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "plato/common/error.hpp"
#include "plato/common/rng.hpp"
#include "plato/eval/eval.hpp"

using namespace plato;
using namespace plato::eval;
using primitives::PrimitiveKind;

namespace {

models::ModelConfig tiny() {
  models::ModelConfig c;
  c.latent_dim = 16;
  c.policy_hidden = 8;
  c.posterior_hidden = 8;
  c.prior_width = 8;
  c.prior_layers = 1;
  return c;
}

models::Bundle random_bundle(models::Variant v, std::uint64_t seed) {
  return models::Bundle(v, tiny(), playlog::Dims{}, models::Normalizer::identity(playlog::Dims{}.robot + playlog::Dims{}.object),
                        seed);
}

std::vector<ResultRow> rows_for(const std::string& method, int seed, PrimitiveKind k, int successes, int n) {
  std::vector<ResultRow> out;
  for (int i = 0; i < n; ++i) out.push_back({method, k, seed, i, i < successes, 10});
  return out;
}

}  // namespace

TEST(Metric, DefaultsScaleWithWorldAndHorizon) {
  sim::WorldConfig w;
  const SuccessMetric m = SuccessMetric::for_config(w, 20);
  EXPECT_DOUBLE_EQ(m.eps_pos, 1.5 * w.ego_radius);
  EXPECT_NEAR(m.eps_rot, 15.0 * M_PI / 180.0, 1e-15);
  EXPECT_EQ(m.min_progress, 0.5);
  EXPECT_EQ(m.max_steps, 60);
  SuccessMetric bad = m;
  bad.max_steps = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(MakeGoal, PushRGoalIsRightOfStartAndWorldRestored) {
  Rng rng(1);
  int made = 0;
  for (std::uint64_t s = 0; made < 50; ++s) {
    sim::World w(sim::WorldConfig{}, 100 + s);
    const sim::World before = w;
    const auto g = make_goal(w, PrimitiveKind::kPushR, rng);
    ASSERT_TRUE(w == before);
    if (!g || g->spec.kind != PrimitiveKind::kPushR) continue;
    ++made;
    EXPECT_GT(g->goal_block.position.x(), g->start_block.position.x());
    EXPECT_TRUE(sim::World::restore(g->snapshot) == before);
    EXPECT_EQ(g->goal_object.size(), w.layout().object_dim());
  }
}

TEST(MakeGoal, GoalDisplacementsSpanSampledRange) {
  const sim::WorldConfig cfg;
  const primitives::PrimitiveRanges R;
  const double lo = R.push_distance_frac.min * cfg.arena_width, hi = R.push_distance_frac.max * cfg.arena_width;
  double dmin = 1e9, dmax = -1e9;
  int n = 0;
  for (int i = 0; i < 1000; ++i) {
    const GoalSpec g = episode_goal(cfg, PrimitiveKind::kPushR, 3, i);
    if (g.spec.kind != PrimitiveKind::kPushR) continue;
    ++n;
    const double d = g.goal_block.position.x() - g.start_block.position.x();
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  ASSERT_GT(n, 500);
  const double slack = 0.2 * (hi - lo);
  EXPECT_LE(dmin, lo + slack) << dmin;
  EXPECT_GE(dmax, hi - slack) << dmax;
}

TEST(EpisodeGoal, NeverMetAtStart) {
  const sim::WorldConfig cfg;
  const SuccessMetric m = SuccessMetric::for_config(cfg);
  for (auto k : primitives::kAllKinds) {
    for (int i = 0; i < 200; ++i) {
      const GoalSpec g = episode_goal(cfg, k, 505, i);
      ASSERT_FALSE(is_success(g, g.start_block, m)) << primitives::to_string(k) << " " << i;
    }
  }
}

TEST(EpisodeGoal, DeterministicPerIndex) {
  const sim::WorldConfig cfg;
  const GoalSpec a = episode_goal(cfg, PrimitiveKind::kLift, 9, 4), b = episode_goal(cfg, PrimitiveKind::kLift, 9, 4);
  EXPECT_EQ(a.goal_object, b.goal_object);
  EXPECT_EQ(a.snapshot.bytes, b.snapshot.bytes);
  EXPECT_NE(a.goal_object, episode_goal(cfg, PrimitiveKind::kLift, 9, 5).goal_object);
}

TEST(RunEpisode, ScriptedReplaySucceeds) {
  const sim::WorldConfig cfg;
  const SuccessMetric m = SuccessMetric::for_config(cfg);
  for (auto k : primitives::kAllKinds) {
    int ok = 0;
    for (int i = 0; i < 20; ++i) ok += run_scripted_episode(episode_goal(cfg, k, 11, i), m).success;
    EXPECT_GE(ok, 16) << primitives::to_string(k);
  }
}

TEST(RunEpisode, StationaryPolicyTimesOut) {
  const sim::WorldConfig cfg;
  const SuccessMetric m = SuccessMetric::for_config(cfg);
  const ObsPolicy hold = [](const Eigen::VectorXd& obs) { return sim::Action{sim::Vec2(obs[0], obs[1]), false}; };
  for (auto k : primitives::kAllKinds) {
    int ok = 0;
    for (int i = 0; i < 20; ++i) {
      const EvalResult r = run_episode(hold, episode_goal(cfg, k, 12, i), m);
      ok += r.success;
      if (!r.success) {
        EXPECT_EQ(r.steps_used, m.max_steps);
      }
      EXPECT_LE(r.steps_used, m.max_steps);
    }
    EXPECT_LE(ok, 2) << primitives::to_string(k);
  }
}

TEST(RunEpisode, PolicySeesOnlyObservations) {
  const sim::WorldConfig cfg;
  const GoalSpec g = episode_goal(cfg, PrimitiveKind::kPushL, 13, 0);
  const sim::World start = sim::World::restore(g.snapshot);
  bool first = true;
  const ObsPolicy p = [&](const Eigen::VectorXd& obs) {
    if (first) {
      EXPECT_EQ(obs, start.observe_clean());
    }
    first = false;
    EXPECT_EQ(obs.size(), start.layout().total_dim());
    return sim::Action{sim::Vec2(obs[0], obs[1]), false};
  };
  run_episode(p, g, SuccessMetric::for_config(cfg));
}

TEST(RunEpisode, BundleRolloutIsDeterministic) {
  const sim::WorldConfig cfg;
  models::Bundle b = random_bundle(models::Variant::kPLATO, 3);
  const GoalSpec g = episode_goal(cfg, PrimitiveKind::kLift, 14, 0);
  const SuccessMetric m = SuccessMetric::for_config(cfg);
  const EvalResult x = run_episode(b, g, m, 5), y = run_episode(b, g, m, 5);
  EXPECT_EQ(x.steps_used, y.steps_used);
  EXPECT_EQ(x.pos_error, y.pos_error);
}

TEST(Table, SingleSeedHasZeroStdErr) {
  const SuccessTable t = aggregate(rows_for("PLATO", 0, PrimitiveKind::kPushL, 7, 10));
  const TableCell* c = t.find("PLATO", PrimitiveKind::kPushL);
  ASSERT_NE(c, nullptr);
  EXPECT_DOUBLE_EQ(c->mean, 70.0);
  EXPECT_EQ(c->std_err, 0.0);
  EXPECT_EQ(t.find("LMP", PrimitiveKind::kPushL), nullptr);
}

TEST(Table, IdenticalSeedsHaveZeroStdErr) {
  auto rows = rows_for("LMP", 0, PrimitiveKind::kLift, 3, 10);
  const auto more = rows_for("LMP", 1, PrimitiveKind::kLift, 3, 10);
  rows.insert(rows.end(), more.begin(), more.end());
  const TableCell* c = aggregate(rows).find("LMP", PrimitiveKind::kLift);
  ASSERT_NE(c, nullptr);
  EXPECT_DOUBLE_EQ(c->mean, 30.0);
  EXPECT_EQ(c->std_err, 0.0);
  EXPECT_EQ(c->seeds, 2);
}

TEST(Table, StdErrAcrossSeeds) {
  auto rows = rows_for("PLATO", 0, PrimitiveKind::kPushR, 5, 10);
  const auto more = rows_for("PLATO", 1, PrimitiveKind::kPushR, 7, 10);
  rows.insert(rows.end(), more.begin(), more.end());
  const auto push = rows_for("PLATO", 0, PrimitiveKind::kPushL, 10, 10);
  rows.insert(rows.end(), push.begin(), push.end());
  const SuccessTable t = aggregate(rows);
  const TableCell* c = t.find("PLATO", PrimitiveKind::kPushR);
  ASSERT_NE(c, nullptr);
  EXPECT_DOUBLE_EQ(c->mean, 60.0);
  // Sample std 14.142 over sqrt(2).
  EXPECT_NEAR(c->std_err, 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(t.average("PLATO"), 80.0);
}

TEST(Table, CsvRoundTripAndTextFormat) {
  auto rows = rows_for("PLATO", 0, PrimitiveKind::kPushL, 4, 6);
  const auto more = rows_for("GCBC", 1, PrimitiveKind::kSideRotate, 2, 6);
  rows.insert(rows.end(), more.begin(), more.end());
  std::stringstream ss;
  write_results_csv(rows, ss);
  const auto back = read_results_csv(ss);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].method, rows[i].method);
    EXPECT_EQ(back[i].primitive, rows[i].primitive);
    EXPECT_EQ(back[i].seed, rows[i].seed);
    EXPECT_EQ(back[i].episode, rows[i].episode);
    EXPECT_EQ(back[i].success, rows[i].success);
    EXPECT_EQ(back[i].steps, rows[i].steps);
  }
  std::ostringstream txt;
  write_table(aggregate(back), txt);
  EXPECT_NE(txt.str().find("66.7(0.0)"), std::string::npos) << txt.str();
  EXPECT_NE(txt.str().find("SideRotate"), std::string::npos);
  EXPECT_NE(txt.str().find("absent"), std::string::npos);  // GCBC has no PushL cell
  std::istringstream bad("method,primitive,seed,episode,success,steps\nPLATO,Fly,0,0,1,3\n");
  EXPECT_ANY_THROW(read_results_csv(bad));
}

TEST(Evaluate, MissingCheckpointListedAsAbsent) {
  const std::string dir = std::filesystem::temp_directory_path().string();
  models::Bundle b = random_bundle(models::Variant::kGCBC, 1);
  const std::string path = dir + "/plato_test_eval_gcbc.ckpt";
  models::save_bundle(b, path);
  EvaluateOptions o;
  o.primitives = {PrimitiveKind::kPushL};
  o.n_episodes = 3;
  o.metric = SuccessMetric::for_config(sim::WorldConfig{});
  std::vector<ResultRow> rows;
  const SuccessTable t = evaluate({{"GCBC", 0, path}, {"GCBC", 1, path}, {"GCBC", 2, dir + "/nope.ckpt"}},
                                  sim::WorldConfig{}, o, &rows);
  ASSERT_EQ(t.absent.size(), 1u);
  EXPECT_EQ(rows.size(), 6u);
  const TableCell* c = t.find("GCBC", PrimitiveKind::kPushL);
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->seeds, 2);
  EXPECT_EQ(c->std_err, 0.0);
  std::filesystem::remove(path);
}

TEST(Latents, SixteenDimsGiveSeventeenColumnsAndRepeat) {
  models::Bundle b = random_bundle(models::Variant::kPLATO, 2);
  EvaluateOptions o;
  o.primitives = {PrimitiveKind::kPushL, PrimitiveKind::kTip};
  o.n_episodes = 4;
  o.eval_seed = 21;
  const auto rows = export_latents(b, sim::WorldConfig{}, o);
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[0].label, PrimitiveKind::kPushL);
  EXPECT_EQ(rows[7].label, PrimitiveKind::kTip);
  std::ostringstream os;
  write_latents_csv(rows, os);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(std::count(header.begin(), header.end(), ',') + 1, 17);
  const auto again = export_latents(b, sim::WorldConfig{}, o);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].z, again[i].z);
  models::Bundle g = random_bundle(models::Variant::kGCBC, 2);
  EXPECT_THROW(export_latents(g, sim::WorldConfig{}, o), UsageError);
}
