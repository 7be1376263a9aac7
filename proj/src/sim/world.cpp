#include "plato/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "plato/common/binary_io.hpp"
#include "plato/common/error.hpp"
#include "plato/common/hash.hpp"
#include "plato/common/json_fields.hpp"

namespace plato::sim {

namespace {

constexpr std::uint32_t kSnapshotVersion = 1;
constexpr int kEgo = -1;
constexpr int kStatic = -2;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }
Vec2 perp(const Vec2& r) { return Vec2(-r.y(), r.x()); }

Eigen::Matrix2d rotation(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

struct Contact {
  int a = kStatic;  // normal points from a to b
  int b = kStatic;
  Vec2 point = Vec2::Zero();
  Vec2 normal = Vec2::Zero();
  double penetration = 0.0;
  Vec2 ra = Vec2::Zero();
  Vec2 rb = Vec2::Zero();
  double mass_n = 0.0;
  double mass_t = 0.0;
  double bias = 0.0;
  double acc_n = 0.0;
  double acc_t = 0.0;
};

/// Mutable view of one body for the velocity solver.
struct BodyView {
  Vec2* v = nullptr;
  double* w = nullptr;
  double inv_m = 0.0;
  double inv_i = 0.0;
  Vec2 x = Vec2::Zero();

  Vec2 velocity_at(const Vec2& r) const {
    if (!v) return Vec2::Zero();
    return *v + (w ? *w : 0.0) * perp(r);
  }
  void apply(const Vec2& impulse, const Vec2& r) const {
    if (!v) return;
    *v += inv_m * impulse;
    if (w) *w += inv_i * cross(r, impulse);
  }
};

class Solver {
 public:
  Solver(WorldState& s, const WorldConfig& c) : state_(s), cfg_(c) {
    blocks_.reserve(s.blocks.size());
    for (auto& b : s.blocks) {
      blocks_.push_back(BodyView{&b.lin_velocity, &b.ang_velocity, 1.0 / b.mass, 1.0 / b.inertia(), b.position});
    }
    ego_ = BodyView{&s.ego.velocity, nullptr, 1.0 / c.ego_solver_mass, 0.0, s.ego.position};
  }

  const BodyView& body(int id) const {
    if (id == kEgo) return ego_;
    if (id == kStatic) return static_;
    return blocks_[static_cast<std::size_t>(id)];
  }

  void add(int a, int b, const Vec2& point, const Vec2& normal, double penetration) {
    Contact c;
    c.a = a;
    c.b = b;
    c.point = point;
    c.normal = normal;
    c.penetration = penetration;
    contacts_.push_back(c);
  }

  void collide() {
    const double m = cfg_.speculative_margin;
    const double w = cfg_.arena_width, h = cfg_.arena_height;
    for (std::size_t i = 0; i < state_.blocks.size(); ++i) {
      const auto& blk = state_.blocks[i];
      const int id = static_cast<int>(i);
      const Eigen::Matrix2d rot = rotation(blk.angle);
      const Vec2 he = blk.half_extents;
      const Vec2 corners[4] = {
          blk.position + rot * Vec2(-he.x(), -he.y()), blk.position + rot * Vec2(he.x(), -he.y()),
          blk.position + rot * Vec2(he.x(), he.y()), blk.position + rot * Vec2(-he.x(), he.y())};
      for (const Vec2& c : corners) {
        // Walls: separation measured along the inward wall normal.
        if (c.y() < m) add(id, kStatic, c, Vec2(0, -1), -c.y());
        if (h - c.y() < m) add(id, kStatic, c, Vec2(0, 1), -(h - c.y()));
        if (c.x() < m) add(id, kStatic, c, Vec2(-1, 0), -c.x());
        if (w - c.x() < m) add(id, kStatic, c, Vec2(1, 0), -(w - c.x()));
      }
      // Block against ego disc.
      collide_circle(id);
      // Block against later blocks: corners of each inside the other.
      for (std::size_t j = i + 1; j < state_.blocks.size(); ++j) {
        collide_corners(id, static_cast<int>(j));
        collide_corners(static_cast<int>(j), id);
      }
    }
  }

  void prepare(double dt) {
    for (auto& c : contacts_) {
      const BodyView& a = body(c.a);
      const BodyView& b = body(c.b);
      c.ra = c.point - a.x;
      c.rb = c.point - b.x;
      const Vec2 t = perp(c.normal);
      const double rna = cross(c.ra, c.normal), rnb = cross(c.rb, c.normal);
      const double rta = cross(c.ra, t), rtb = cross(c.rb, t);
      const double kn = a.inv_m + b.inv_m + a.inv_i * rna * rna + b.inv_i * rnb * rnb;
      const double kt = a.inv_m + b.inv_m + a.inv_i * rta * rta + b.inv_i * rtb * rtb;
      c.mass_n = kn > 0 ? 1.0 / kn : 0.0;
      c.mass_t = kt > 0 ? 1.0 / kt : 0.0;
      if (c.penetration > 0) {
        c.bias = cfg_.baumgarte / dt * std::max(0.0, c.penetration - cfg_.penetration_slop);
      } else {
        c.bias = c.penetration / dt;  // speculative: allow closing the gap exactly
      }
      if (cfg_.restitution > 0) {
        const double vn = (b.velocity_at(c.rb) - a.velocity_at(c.ra)).dot(c.normal);
        if (vn < -1.0) c.bias = std::max(c.bias, -cfg_.restitution * vn);
      }
    }
  }

  void solve_contacts() {
    for (auto& c : contacts_) {
      const BodyView& a = body(c.a);
      const BodyView& b = body(c.b);
      // Normal.
      Vec2 vrel = b.velocity_at(c.rb) - a.velocity_at(c.ra);
      double dl = c.mass_n * (-vrel.dot(c.normal) + c.bias);
      const double acc = std::max(c.acc_n + dl, 0.0);
      dl = acc - c.acc_n;
      c.acc_n = acc;
      Vec2 p = dl * c.normal;
      b.apply(p, c.rb);
      a.apply(-p, c.ra);
      // Friction.
      const Vec2 t = perp(c.normal);
      vrel = b.velocity_at(c.rb) - a.velocity_at(c.ra);
      double dt_l = c.mass_t * (-vrel.dot(t));
      const double limit = cfg_.friction_coeff * c.acc_n;
      const double acc_t = std::clamp(c.acc_t + dt_l, -limit, limit);
      dt_l = acc_t - c.acc_t;
      c.acc_t = acc_t;
      p = dt_l * t;
      b.apply(p, c.rb);
      a.apply(-p, c.ra);
    }
  }

  void solve_tether(double dt) {
    auto& ego = state_.ego;
    if (!ego.tether_active || !ego.tether_anchor) return;
    const TetherAnchor& an = *ego.tether_anchor;
    const BlockState& blk = state_.blocks[static_cast<std::size_t>(an.block)];
    const BodyView& a = body(an.block);
    const Vec2 pa = blk.to_world(an.local);
    const Vec2 ra = pa - blk.position;
    Vec2 d = ego.position - pa;
    const double len = d.norm();
    const Vec2 n = len > 1e-9 ? Vec2(d / len) : Vec2(0, 1);
    const double rn = cross(ra, n);
    const double k = a.inv_m + a.inv_i * rn * rn + ego_.inv_m;
    if (k <= 0) return;
    const double c_err = len - an.length;
    const double vn = (ego_.velocity_at(Vec2::Zero()) - a.velocity_at(ra)).dot(n);
    const double lambda = (-vn - cfg_.baumgarte / dt * c_err) / k;
    const Vec2 p = lambda * n;
    ego_.apply(p, Vec2::Zero());
    a.apply(-p, ra);
  }

 private:
  void collide_circle(int id) {
    const auto& blk = state_.blocks[static_cast<std::size_t>(id)];
    const double r = cfg_.ego_radius;
    const Vec2 q = blk.to_local(state_.ego.position);
    const Vec2 he = blk.half_extents;
    const Eigen::Matrix2d rot = rotation(blk.angle);
    const bool inside = std::abs(q.x()) < he.x() && std::abs(q.y()) < he.y();
    if (inside) {
      const double dx = he.x() - std::abs(q.x());
      const double dy = he.y() - std::abs(q.y());
      Vec2 n_local, surf = q;
      double depth;
      if (dx < dy) {
        n_local = Vec2(q.x() >= 0 ? 1.0 : -1.0, 0.0);
        surf.x() = n_local.x() * he.x();
        depth = dx;
      } else {
        n_local = Vec2(0.0, q.y() >= 0 ? 1.0 : -1.0);
        surf.y() = n_local.y() * he.y();
        depth = dy;
      }
      add(id, kEgo, blk.position + rot * surf, rot * n_local, r + depth);
      return;
    }
    const Vec2 closest(std::clamp(q.x(), -he.x(), he.x()), std::clamp(q.y(), -he.y(), he.y()));
    const Vec2 d = q - closest;
    const double dist = d.norm();
    const double sep = dist - r;
    if (sep < cfg_.speculative_margin && dist > 1e-12) {
      add(id, kEgo, blk.position + rot * closest, rot * (d / dist), -sep);
    }
  }

  // Corners of block i tested against the faces of block j.
  void collide_corners(int i, int j) {
    const auto& bi = state_.blocks[static_cast<std::size_t>(i)];
    const auto& bj = state_.blocks[static_cast<std::size_t>(j)];
    const Eigen::Matrix2d ri = rotation(bi.angle), rj = rotation(bj.angle);
    const Vec2 he = bi.half_extents, hj = bj.half_extents;
    const double m = cfg_.speculative_margin;
    const Vec2 local_corners[4] = {Vec2(-he.x(), -he.y()), Vec2(he.x(), -he.y()), Vec2(he.x(), he.y()),
                                   Vec2(-he.x(), he.y())};
    for (const Vec2& lc : local_corners) {
      const Vec2 c = bi.position + ri * lc;
      const Vec2 q = bj.to_local(c);
      if (std::abs(q.x()) >= hj.x() + m || std::abs(q.y()) >= hj.y() + m) continue;
      const double dx = hj.x() - std::abs(q.x());
      const double dy = hj.y() - std::abs(q.y());
      // Skip corners that are only near an extended face line, not the face itself.
      if (dx < 0 && dy < 0) continue;
      Vec2 n_local;
      double pen;
      if (dx < dy) {
        n_local = Vec2(q.x() >= 0 ? 1.0 : -1.0, 0.0);
        pen = dx;
      } else {
        n_local = Vec2(0.0, q.y() >= 0 ? 1.0 : -1.0);
        pen = dy;
      }
      // Face normal of j points toward i; contact normal runs from i to j.
      add(i, j, c, -(rj * n_local), pen);
    }
  }

  WorldState& state_;
  const WorldConfig& cfg_;
  std::vector<BodyView> blocks_;
  BodyView ego_;
  BodyView static_;
  std::vector<Contact> contacts_;
};

void write_vec(ByteWriter& w, const Vec2& v) {
  w.f64(v.x());
  w.f64(v.y());
}
Vec2 read_vec(ByteReader& r) {
  const double x = r.f64();
  const double y = r.f64();
  return Vec2(x, y);
}

}  // namespace

double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a <= 0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

void WorldConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("world config: " + m); };
  if (!(dt > 0)) fail("dt must be > 0");
  if (!(control_rate > 0)) fail("control_rate must be > 0");
  if (substeps_per_control() < 1) fail("control period shorter than dt");
  if (!(grab_radius > 0)) fail("grab_radius must be > 0");
  if (!(ego_radius > 0)) fail("ego_radius must be > 0");
  if (!(ego_max_speed > 0)) fail("ego_max_speed must be > 0");
  if (!(arena_width > 0) || !(arena_height > 0)) fail("arena dimensions must be > 0");
  if (n_blocks < 1) fail("n_blocks must be >= 1");
  if (!(block_size_range.min > 0) || block_size_range.min > block_size_range.max) {
    fail("block_size_range must satisfy 0 < min <= max");
  }
  if (!(block_mass_range.min > 0) || block_mass_range.min > block_mass_range.max) {
    fail("block_mass_range must satisfy 0 < min <= max");
  }
  if (2 * block_size_range.max >= arena_height || 2 * block_size_range.max >= arena_width) {
    fail("blocks do not fit in the arena");
  }
  if (friction_coeff < 0) fail("friction_coeff must be >= 0");
  if (restitution < 0 || restitution > 1) fail("restitution must be in [0, 1]");
  if (obs_noise_std < 0) fail("obs_noise_std must be >= 0");
  if (solver_iterations < 1) fail("solver_iterations must be >= 1");
  if (!(ego_solver_mass > 0)) fail("ego_solver_mass must be > 0");
  if (!(tether_damping >= 0)) fail("tether_damping must be >= 0");
}

int WorldConfig::substeps_per_control() const {
  return static_cast<int>(std::lround(1.0 / (dt * control_rate)));
}

std::string WorldConfig::hash() const {
  nlohmann::json j = *this;
  return hex64(fnv1a64(j.dump()));
}

void to_json(nlohmann::json& j, const WorldConfig& c) {
  j = nlohmann::json{{"arena_width", c.arena_width},
                     {"arena_height", c.arena_height},
                     {"gravity", c.gravity},
                     {"dt", c.dt},
                     {"control_rate", c.control_rate},
                     {"grab_radius", c.grab_radius},
                     {"ego_radius", c.ego_radius},
                     {"ego_max_speed", c.ego_max_speed},
                     {"friction_coeff", c.friction_coeff},
                     {"restitution", c.restitution},
                     {"n_blocks", c.n_blocks},
                     {"block_size_range", {c.block_size_range.min, c.block_size_range.max}},
                     {"block_mass_range", {c.block_mass_range.min, c.block_mass_range.max}},
                     {"obs_noise_std", c.obs_noise_std},
                     {"solver_iterations", c.solver_iterations},
                     {"baumgarte", c.baumgarte},
                     {"penetration_slop", c.penetration_slop},
                     {"penetration_tolerance", c.penetration_tolerance},
                     {"contact_epsilon", c.contact_epsilon},
                     {"speculative_margin", c.speculative_margin},
                     {"ego_solver_mass", c.ego_solver_mass},
                     {"tether_damping", c.tether_damping}};
}

void from_json(const nlohmann::json& j, WorldConfig& c) {
  StrictObject o(j, "world");
  o.get("arena_width", c.arena_width);
  o.get("arena_height", c.arena_height);
  o.get("gravity", c.gravity);
  o.get("dt", c.dt);
  o.get("control_rate", c.control_rate);
  o.get("grab_radius", c.grab_radius);
  o.get("ego_radius", c.ego_radius);
  o.get("ego_max_speed", c.ego_max_speed);
  o.get("friction_coeff", c.friction_coeff);
  o.get("restitution", c.restitution);
  o.get("n_blocks", c.n_blocks);
  std::array<double, 2> r{};
  if (o.get("block_size_range", r)) c.block_size_range = {r[0], r[1]};
  if (o.get("block_mass_range", r)) c.block_mass_range = {r[0], r[1]};
  o.get("obs_noise_std", c.obs_noise_std);
  o.get("solver_iterations", c.solver_iterations);
  o.get("baumgarte", c.baumgarte);
  o.get("penetration_slop", c.penetration_slop);
  o.get("penetration_tolerance", c.penetration_tolerance);
  o.get("contact_epsilon", c.contact_epsilon);
  o.get("speculative_margin", c.speculative_margin);
  o.get("ego_solver_mass", c.ego_solver_mass);
  o.get("tether_damping", c.tether_damping);
  o.finish();
}

Vec2 BlockState::aabb_half() const {
  const double c = std::abs(std::cos(angle)), s = std::abs(std::sin(angle));
  return Vec2(c * half_extents.x() + s * half_extents.y(), s * half_extents.x() + c * half_extents.y());
}

Vec2 BlockState::to_world(const Vec2& local) const { return position + rotation(angle) * local; }

Vec2 BlockState::to_local(const Vec2& world) const {
  return rotation(angle).transpose() * (world - position);
}

Vec2 closest_surface_point(const BlockState& b, const Vec2& p) {
  Vec2 q = b.to_local(p);
  const Vec2 he = b.half_extents;
  if (std::abs(q.x()) < he.x() && std::abs(q.y()) < he.y()) {
    if (he.x() - std::abs(q.x()) < he.y() - std::abs(q.y())) {
      q.x() = q.x() >= 0 ? he.x() : -he.x();
    } else {
      q.y() = q.y() >= 0 ? he.y() : -he.y();
    }
  } else {
    q = Vec2(std::clamp(q.x(), -he.x(), he.x()), std::clamp(q.y(), -he.y(), he.y()));
  }
  return b.to_world(q);
}

World::World(const WorldConfig& config, std::uint64_t seed) : config_(config), rng_(seed) {
  config_.validate();
  const double w = config_.arena_width, h = config_.arena_height;
  constexpr int kAttempts = 1000;
  constexpr double kGap = 0.02;
  for (int b = 0; b < config_.n_blocks; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
      BlockState blk;
      blk.half_extents = Vec2(rng_.uniform(config_.block_size_range.min, config_.block_size_range.max),
                              rng_.uniform(config_.block_size_range.min, config_.block_size_range.max));
      blk.mass = rng_.uniform(config_.block_mass_range.min, config_.block_mass_range.max);
      blk.position = Vec2(rng_.uniform(blk.half_extents.x(), w - blk.half_extents.x()), blk.half_extents.y());
      const bool overlaps = std::any_of(state_.blocks.begin(), state_.blocks.end(), [&](const BlockState& o) {
        return std::abs(o.position.x() - blk.position.x()) < o.half_extents.x() + blk.half_extents.x() + kGap;
      });
      if (!overlaps) {
        state_.blocks.push_back(blk);
        placed = true;
      }
    }
    if (!placed) throw ConfigError("world_new: could not place block " + std::to_string(b) + " after 1000 attempts");
  }
  const double r = config_.ego_radius;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    state_.ego.position = Vec2(rng_.uniform(r, w - r), rng_.uniform(r, h - r));
    bool clear = true;
    for (int b = 0; b < config_.n_blocks; ++b) clear = clear && ego_block_distance(b) > 0.05;
    if (clear) {
      state_.contact = compute_contact();
      return;
    }
  }
  throw ConfigError("world_new: could not place the ego agent after 1000 attempts");
}

double World::ego_block_distance(int b) const {
  const auto& blk = state_.blocks[static_cast<std::size_t>(b)];
  const Vec2 q = blk.to_local(state_.ego.position);
  const Vec2 he = blk.half_extents;
  double d;
  if (std::abs(q.x()) < he.x() && std::abs(q.y()) < he.y()) {
    d = -std::min(he.x() - std::abs(q.x()), he.y() - std::abs(q.y()));
  } else {
    const Vec2 c(std::clamp(q.x(), -he.x(), he.x()), std::clamp(q.y(), -he.y(), he.y()));
    d = (q - c).norm();
  }
  return d - config_.ego_radius;
}

int World::nearest_block() const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int b = 0; b < static_cast<int>(state_.blocks.size()); ++b) {
    const double d = ego_block_distance(b);
    if (d < best_d) {
      best_d = d;
      best = b;
    }
  }
  return best;
}

bool World::compute_contact() const {
  if (state_.ego.tether_active) return true;
  for (int b = 0; b < static_cast<int>(state_.blocks.size()); ++b) {
    if (ego_block_distance(b) <= config_.contact_epsilon) return true;
  }
  return false;
}

bool World::step(const Action& action) {
  if (!action.target_position.allFinite()) throw InputError("step: non-finite action target");
  Action a = action;
  const double r = config_.ego_radius;
  a.target_position.x() = std::clamp(a.target_position.x(), r, config_.arena_width - r);
  a.target_position.y() = std::clamp(a.target_position.y(), r, config_.arena_height - r);
  const int n = config_.substeps_per_control();
  for (int i = 0; i < n; ++i) substep(a, (n - i) * config_.dt);
  ++state_.step_index;
  state_.contact = compute_contact();
  return state_.contact;
}

void World::damp_tether(double dt) {
  const auto& ego = state_.ego;
  if (!ego.tether_active || !ego.tether_anchor || config_.tether_damping <= 0) return;
  const TetherAnchor& an = *ego.tether_anchor;
  auto& blk = state_.blocks[static_cast<std::size_t>(an.block)];
  const double f = 1.0 - std::exp(-config_.tether_damping * dt);
  const Vec2 ra = blk.to_world(an.local) - blk.position;
  Vec2 n = ego.position - blk.position - ra;
  n = n.norm() > 1e-9 ? Vec2(n.normalized()) : Vec2(0, 1);
  const Vec2 t(-n.y(), n.x());
  const Vec2 v_anchor = blk.lin_velocity + blk.ang_velocity * Vec2(-ra.y(), ra.x());
  // Damp only the swing about the ego, never the rod direction the solver holds.
  blk.lin_velocity += f * (ego.velocity - v_anchor).dot(t) * t;
  blk.ang_velocity *= 1.0 - f;
}

void World::substep(const Action& action, double time_left) {
  const double dt = config_.dt;
  auto& ego = state_.ego;

  // Tether bookkeeping.
  if (!action.grab) {
    ego.tether_active = false;
    ego.tether_anchor.reset();
  } else if (!ego.tether_active) {
    const int b = nearest_block();
    if (ego_block_distance(b) <= config_.grab_radius) {
      const auto& blk = state_.blocks[static_cast<std::size_t>(b)];
      const Vec2 anchor = closest_surface_point(blk, ego.position);
      ego.tether_active = true;
      ego.tether_anchor = TetherAnchor{b, blk.to_local(anchor), std::max((ego.position - anchor).norm(), 1e-3)};
    }
  }

  // Kinematic velocity command: arrive at the target when the control period ends.
  const Vec2 d = action.target_position - ego.position;
  const double dist = d.norm();
  const double vmax = config_.ego_max_speed;
  ego.velocity = dist > 0 ? Vec2(d * (std::min(vmax, dist / time_left) / dist)) : Vec2::Zero();

  for (auto& blk : state_.blocks) blk.lin_velocity.y() -= config_.gravity * dt;

  Solver solver(state_, config_);
  solver.collide();
  solver.prepare(dt);
  for (int it = 0; it < config_.solver_iterations; ++it) {
    solver.solve_contacts();
    solver.solve_tether(dt);
  }
  damp_tether(dt);

  const double speed = ego.velocity.norm();
  if (speed > vmax) ego.velocity *= vmax / speed;
  ego.position += ego.velocity * dt;
  const double r = config_.ego_radius;
  for (int k = 0; k < 2; ++k) {
    const double hi = (k == 0 ? config_.arena_width : config_.arena_height) - r;
    if (ego.position[k] < r) {
      ego.position[k] = r;
      ego.velocity[k] = 0;
    } else if (ego.position[k] > hi) {
      ego.position[k] = hi;
      ego.velocity[k] = 0;
    }
  }
  for (auto& blk : state_.blocks) {
    blk.position += blk.lin_velocity * dt;
    blk.angle += blk.ang_velocity * dt;
  }
  project_into_arena();
}

// A block squeezed between the ego (solver mass ego_solver_mass) and a wall can be
// driven deeper than Baumgarte recovers in one substep. Translate it back so no
// corner is more than half the tolerance outside, and drop the inward velocity.
void World::project_into_arena() {
  const double allow = 0.5 * config_.penetration_tolerance;
  const Vec2 hi(config_.arena_width, config_.arena_height);
  for (auto& blk : state_.blocks) {
    const Vec2 h = blk.aabb_half();
    for (int k = 0; k < 2; ++k) {
      const double below = -(blk.position[k] - h[k]);
      const double above = blk.position[k] + h[k] - hi[k];
      if (below > allow) {
        blk.position[k] += below - allow;
        blk.lin_velocity[k] = std::max(0.0, blk.lin_velocity[k]);
      } else if (above > allow) {
        blk.position[k] -= above - allow;
        blk.lin_velocity[k] = std::min(0.0, blk.lin_velocity[k]);
      }
    }
  }
}

StateVector World::observe_clean() const {
  const auto lay = layout();
  StateVector s(lay.total_dim());
  const auto& e = state_.ego;
  s << e.position.x(), e.position.y(), e.velocity.x(), e.velocity.y(), e.tether_active ? 1.0 : 0.0,
      StateVector::Zero(lay.object_dim());
  for (int b = 0; b < config_.n_blocks; ++b) {
    const auto& blk = state_.blocks[static_cast<std::size_t>(b)];
    auto rec = s.segment(lay.robot_dim() + lay.block_offset(b), ObservationLayout::kBlockDim);
    rec << blk.position.x(), blk.position.y(), std::sin(blk.angle), std::cos(blk.angle), blk.lin_velocity.x(),
        blk.lin_velocity.y(), blk.ang_velocity, blk.half_extents.x(), blk.half_extents.y(), blk.mass;
  }
  return s;
}

StateVector World::observe() {
  if (config_.obs_noise_std <= 0) return observe_clean();
  StateVector s = observe_clean();
  const double sd = config_.obs_noise_std;
  const auto lay = layout();
  s[0] += rng_.normal(0, sd);
  s[1] += rng_.normal(0, sd);
  for (int b = 0; b < config_.n_blocks; ++b) {
    const auto& blk = state_.blocks[static_cast<std::size_t>(b)];
    auto rec = s.segment(lay.robot_dim() + lay.block_offset(b), ObservationLayout::kBlockDim);
    rec[0] += rng_.normal(0, sd);
    rec[1] += rng_.normal(0, sd);
    const double th = blk.angle + rng_.normal(0, sd);
    rec[2] = std::sin(th);
    rec[3] = std::cos(th);
  }
  return s;
}

WorldSnapshot World::snapshot() const {
  ByteWriter w;
  w.u32(kSnapshotVersion);
  w.str(nlohmann::json(config_).dump());
  const auto& e = state_.ego;
  write_vec(w, e.position);
  write_vec(w, e.velocity);
  w.u8(e.tether_active ? 1 : 0);
  w.u8(e.tether_anchor ? 1 : 0);
  if (e.tether_anchor) {
    w.i64(e.tether_anchor->block);
    write_vec(w, e.tether_anchor->local);
    w.f64(e.tether_anchor->length);
  }
  w.u32(static_cast<std::uint32_t>(state_.blocks.size()));
  for (const auto& b : state_.blocks) {
    write_vec(w, b.position);
    w.f64(b.angle);
    write_vec(w, b.lin_velocity);
    w.f64(b.ang_velocity);
    write_vec(w, b.half_extents);
    w.f64(b.mass);
  }
  w.i64(state_.step_index);
  w.u8(state_.contact ? 1 : 0);
  w.str(rng_.serialize());
  return WorldSnapshot{w.take()};
}

World World::restore(const WorldSnapshot& snapshot) {
  ByteReader r(snapshot.bytes);
  const std::uint32_t version = r.u32();
  if (version != kSnapshotVersion) {
    throw FormatError(FormatError::Kind::kVersion,
                      "snapshot version " + std::to_string(version) + " != " + std::to_string(kSnapshotVersion));
  }
  World w;
  try {
    w.config_ = nlohmann::json::parse(r.str()).get<WorldConfig>();
  } catch (const std::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, std::string("snapshot config: ") + e.what());
  }
  auto& e = w.state_.ego;
  e.position = read_vec(r);
  e.velocity = read_vec(r);
  e.tether_active = r.u8() != 0;
  if (r.u8() != 0) {
    TetherAnchor a;
    a.block = static_cast<int>(r.i64());
    a.local = read_vec(r);
    a.length = r.f64();
    e.tether_anchor = a;
  }
  const std::uint32_t nb = r.u32();
  if (nb != static_cast<std::uint32_t>(w.config_.n_blocks)) {
    throw FormatError(FormatError::Kind::kMalformed, "snapshot block count does not match config");
  }
  w.state_.blocks.resize(nb);
  for (auto& b : w.state_.blocks) {
    b.position = read_vec(r);
    b.angle = r.f64();
    b.lin_velocity = read_vec(r);
    b.ang_velocity = r.f64();
    b.half_extents = read_vec(r);
    b.mass = r.f64();
  }
  w.state_.step_index = r.i64();
  w.state_.contact = r.u8() != 0;
  w.rng_.deserialize(r.str());
  return w;
}

}  // namespace plato::sim
