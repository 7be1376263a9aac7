#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "plato/common/error.hpp"
#include "plato/common/rng.hpp"
#include "plato/sim/world.hpp"

using namespace plato;
using namespace plato::sim;

namespace {

Action hold(const World& w, bool grab = false) { return {w.state().ego.position, grab}; }

Action random_action(Rng& rng, const WorldConfig& c) {
  return {Vec2(rng.uniform(0.0, c.arena_width), rng.uniform(0.0, c.arena_height)), rng.uniform() < 0.3};
}

// Ego parked in the top-left corner, away from everything.
void park_ego(World& w) {
  w.mutable_state().ego.position = Vec2(0.2, w.config().arena_height - 0.2);
  w.mutable_state().ego.velocity.setZero();
}

}  // namespace

TEST(WorldNew, SameSeedGivesIdenticalState) {
  WorldConfig c;
  World a(c, 7), b(c, 7);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(a.state(), b.state());
}

TEST(WorldNew, DegenerateSizeRangeIsExact) {
  WorldConfig c;
  c.block_size_range = {0.5, 0.5};
  World w(c, 3);
  EXPECT_EQ(w.state().blocks[0].half_extents, Vec2(0.5, 0.5));
}

TEST(WorldNew, BlocksRestOnFloor) {
  WorldConfig c;
  c.n_blocks = 3;
  for (std::uint64_t s = 0; s < 50; ++s) {
    World w(c, s);
    for (const auto& b : w.state().blocks) EXPECT_DOUBLE_EQ(b.position.y(), b.half_extents.y());
    for (int b = 0; b < c.n_blocks; ++b) EXPECT_GT(w.ego_block_distance(b), 0.0);
  }
}

TEST(WorldNew, BlockXUniformOverFloorSpan) {
  WorldConfig c;
  c.block_size_range = {0.2, 0.2};
  constexpr int kBins = 20, kSeeds = 10000;
  std::vector<int> hist(kBins, 0);
  const double lo = 0.2, hi = c.arena_width - 0.2;
  for (int s = 0; s < kSeeds; ++s) {
    const double x = World(c, static_cast<std::uint64_t>(s)).state().blocks[0].position.x();
    ASSERT_GE(x, lo);
    ASSERT_LE(x, hi);
    ++hist[std::min(kBins - 1, static_cast<int>((x - lo) / (hi - lo) * kBins))];
  }
  double chi2 = 0;
  const double expect = static_cast<double>(kSeeds) / kBins;
  for (int n : hist) chi2 += (n - expect) * (n - expect) / expect;
  // 99th percentile of chi-square with 19 degrees of freedom.
  EXPECT_LT(chi2, 36.191);
}

TEST(WorldNew, OvercrowdedArenaIsConfigError) {
  WorldConfig c;
  c.n_blocks = 12;
  c.block_size_range = {0.25, 0.25};
  EXPECT_THROW(World(c, 1), ConfigError);
}

TEST(WorldConfigTest, InvariantsRejected) {
  WorldConfig c;
  c.dt = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = WorldConfig{};
  c.grab_radius = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = WorldConfig{};
  c.block_mass_range = {2.0, 1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = WorldConfig{};
  c.n_blocks = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(WorldConfigTest, JsonRoundTripAndUnknownKey) {
  WorldConfig c;
  c.gravity = 7.5;
  c.n_blocks = 2;
  const nlohmann::json j = c;
  const WorldConfig back = j.get<WorldConfig>();
  EXPECT_EQ(back.hash(), c.hash());
  nlohmann::json bad = j;
  bad["gravty"] = 1.0;
  EXPECT_THROW(bad.get<WorldConfig>(), ConfigError);
}

TEST(Step, RestingBlockStaysPut) {
  WorldConfig c;
  World w(c, 11);
  park_ego(w);
  const Vec2 p0 = w.state().blocks[0].position;
  const double a0 = w.state().blocks[0].angle;
  for (int t = 0; t < 100; ++t) w.step(hold(w));
  EXPECT_LE((w.state().blocks[0].position - p0).norm(), c.penetration_tolerance);
  EXPECT_NEAR(w.state().blocks[0].angle, a0, 1e-3);
}

TEST(Step, FreeFallMatchesClosedForm) {
  WorldConfig c;
  World w(c, 5);
  park_ego(w);
  auto& b = w.mutable_state().blocks[0];
  b.position = Vec2(2.5, 2.4);
  b.lin_velocity.setZero();
  const double y0 = b.position.y();
  const int steps = 5;  // 0.5 s, about 1.2 units of drop
  for (int t = 0; t < steps; ++t) w.step(hold(w));
  const double t_s = steps * c.control_dt();
  const double expected = 0.5 * c.gravity * t_s * t_s;
  const double drop = y0 - w.state().blocks[0].position.y();
  EXPECT_NEAR(drop, expected, 0.02 * expected);
}

TEST(Step, TetherLiftsBlock) {
  WorldConfig c;
  World w(c, 21);
  auto& s = w.mutable_state();
  s.blocks[0].position = Vec2(2.0, s.blocks[0].half_extents.y());
  s.blocks[0].angle = 0;
  s.ego.position = Vec2(2.0, 2 * s.blocks[0].half_extents.y() + c.ego_radius + 0.5 * c.grab_radius);
  s.ego.velocity.setZero();
  ASSERT_LT(w.ego_block_distance(0), c.grab_radius);
  const Vec2 start = s.ego.position;
  const double y0 = s.blocks[0].position.y();
  const double delta = 0.5;
  for (int t = 1; t <= 50; ++t) w.step({start + Vec2(0, delta * t / 50.0), true});
  EXPECT_TRUE(w.state().ego.tether_active);
  EXPECT_NEAR(w.state().blocks[0].position.y() - y0, delta, 0.1 * delta);
}

TEST(Step, GrabOutOfRangeDoesNothing) {
  WorldConfig c;
  World w(c, 21);
  park_ego(w);
  w.step(hold(w, true));
  EXPECT_FALSE(w.state().ego.tether_active);
  EXPECT_FALSE(w.state().ego.tether_anchor.has_value());
}

TEST(Step, NonFiniteActionRejected) {
  World w(WorldConfig{}, 1);
  EXPECT_THROW(w.step({Vec2(std::numeric_limits<double>::quiet_NaN(), 1.0), false}), InputError);
  EXPECT_THROW(w.step({Vec2(1.0, std::numeric_limits<double>::infinity()), false}), InputError);
}

TEST(Step, RandomPlayInvariants) {
  // Speed bound, arena containment, contact soundness and tether => contact under random actions.
  WorldConfig c;
  const double step_bound = c.ego_max_speed * c.control_dt() + 1e-9;
  Rng rng(99);
  int tether_steps = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    World w(c, seed);
    Action a = random_action(rng, c);
    for (int t = 0; t < 350; ++t) {
      if (t % 7 == 0) a = random_action(rng, c);
      const Vec2 before = w.state().ego.position;
      const bool contact = w.step(a);
      const auto& s = w.state();
      ASSERT_LE((s.ego.position - before).norm(), step_bound);
      ASSERT_LE(s.ego.velocity.norm(), c.ego_max_speed + 1e-9);
      ASSERT_EQ(s.ego.tether_active, s.ego.tether_anchor.has_value());
      if (s.ego.tether_active) {
        ++tether_steps;
        ASSERT_TRUE(contact);
      }
      if (contact && !s.ego.tether_active) {
        bool close = false;
        for (int b = 0; b < c.n_blocks; ++b) close = close || w.ego_block_distance(b) <= c.contact_epsilon;
        ASSERT_TRUE(close);
      }
      for (const auto& b : s.blocks) {
        const Vec2 h = b.aabb_half();
        ASSERT_GE(b.position.x() - h.x(), -c.penetration_tolerance);
        ASSERT_LE(b.position.x() + h.x(), c.arena_width + c.penetration_tolerance);
        ASSERT_GE(b.position.y() - h.y(), -c.penetration_tolerance);
        ASSERT_LE(b.position.y() + h.y(), c.arena_height + c.penetration_tolerance);
      }
    }
  }
  EXPECT_GT(tether_steps, 0);
}

TEST(Observe, LayoutAndEncoding) {
  WorldConfig c;
  c.n_blocks = 2;
  World w(c, 4);
  w.mutable_state().blocks[0].angle = 0.0;
  const StateVector o = w.observe();
  const ObservationLayout L = w.layout();
  ASSERT_EQ(o.size(), L.total_dim());
  EXPECT_EQ(L.robot_dim(), 5);
  EXPECT_EQ(L.object_dim(), 20);
  EXPECT_EQ(o(4), 0.0);  // tether inactive
  const int b0 = L.robot_dim() + L.block_offset(0);
  EXPECT_EQ(o(b0 + 2), 0.0);  // sin 0
  EXPECT_EQ(o(b0 + 3), 1.0);  // cos 0
  const auto& blk = w.state().blocks[1];
  const int b1 = L.robot_dim() + L.block_offset(1);
  EXPECT_EQ(o(b1 + 0), blk.position.x());
  EXPECT_EQ(o(b1 + 9), blk.mass);
  EXPECT_EQ(o, w.observe());
}

TEST(Observe, NoiseOnlyOnPoseFields) {
  WorldConfig c;
  c.obs_noise_std = 0.01;
  World w(c, 4);
  const StateVector clean = w.observe_clean();
  const StateVector noisy = w.observe();
  EXPECT_NE(clean(0), noisy(0));
  EXPECT_EQ(clean(4), noisy(4));  // tether flag
  const int b0 = w.layout().robot_dim();
  EXPECT_EQ(clean(b0 + 7), noisy(b0 + 7));  // half width
  EXPECT_EQ(clean(b0 + 9), noisy(b0 + 9));  // mass
}

TEST(Snapshot, RestoreThenReplayIsBitExact) {
  WorldConfig c;
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    World w(c, seed);
    for (int t = 0; t < 10; ++t) w.step(random_action(rng, c));
    const WorldSnapshot snap = w.snapshot();
    World r = World::restore(snap);
    ASSERT_TRUE(r == w);
    std::vector<Action> seq;
    for (int t = 0; t < 20; ++t) seq.push_back(random_action(rng, c));
    for (const auto& a : seq) {
      w.step(a);
      r.step(a);
      ASSERT_EQ(w.observe(), r.observe());
    }
    ASSERT_TRUE(r == w);
  }
}

TEST(Snapshot, PreservesTetherAnchor) {
  WorldConfig c;
  World w(c, 21);
  auto& s = w.mutable_state();
  s.ego.position = Vec2(s.blocks[0].position.x(), 2 * s.blocks[0].half_extents.y() + c.ego_radius + 0.02);
  w.step(hold(w, true));
  ASSERT_TRUE(w.state().ego.tether_active);
  const World r = World::restore(w.snapshot());
  EXPECT_EQ(r.state().ego.tether_anchor, w.state().ego.tether_anchor);
}

TEST(Snapshot, VersionMismatchIsFormatError) {
  WorldSnapshot snap = World(WorldConfig{}, 1).snapshot();
  snap.bytes[0] ^= 0xff;
  try {
    World::restore(snap);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::kVersion);
  }
}

TEST(Geometry, WrapAngle) {
  EXPECT_NEAR(wrap_angle(3 * M_PI / 2), -M_PI / 2, 1e-12);
  EXPECT_NEAR(wrap_angle(-3 * M_PI / 2), M_PI / 2, 1e-12);
  EXPECT_NEAR(wrap_angle(M_PI), M_PI, 1e-12);
  EXPECT_NEAR(wrap_angle(0.25), 0.25, 1e-15);
}
