#include "plato/primitives/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "plato/common/error.hpp"
#include "plato/common/json_fields.hpp"

namespace plato::primitives {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMargin = 0.03;

struct Geom {
  Vec2 center;
  Vec2 ext;
  double left, right, top;
};

Geom geom(const sim::BlockState& b) {
  const Vec2 e = b.aabb_half();
  return Geom{b.position, e, b.position.x() - e.x(), b.position.x() + e.x(), b.position.y() + e.y()};
}

Vec2 rotate(const Vec2& v, double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}

bool settled(const sim::BlockState& b) { return b.lin_velocity.norm() < 0.05 && std::abs(b.ang_velocity) < 0.2; }

int sign_of(double x) { return x >= 0 ? 1 : -1; }

/// Side of the block the ego works from for side-engaged kinds.
int engage_side(const PrimitiveSpec& s) {
  switch (s.kind) {
    case PrimitiveKind::kPushL: return 1;
    case PrimitiveKind::kPushR: return -1;
    case PrimitiveKind::kPullL: return -1;
    case PrimitiveKind::kPullR: return 1;
    default: return 0;
  }
}

/// True when the ego cannot fit between the block and the wall it must push from.
bool needs_nudge(const Geom& g, int side, const sim::WorldConfig& c) {
  const double room = side > 0 ? c.arena_width - g.right : g.left;
  return room < 2 * c.ego_radius + 0.1;
}

/// Horizontal direction the block's top moves for rotation kinds (+1 toward +x).
int topple_dir(const PrimitiveSpec& s) {
  return s.kind == PrimitiveKind::kTip ? s.direction : -sign_of(s.magnitude);
}

PrimitiveSpec flipped(PrimitiveSpec s) {
  switch (s.kind) {
    case PrimitiveKind::kPushL: s.kind = PrimitiveKind::kPushR; break;
    case PrimitiveKind::kPushR: s.kind = PrimitiveKind::kPushL; break;
    case PrimitiveKind::kPullL: s.kind = PrimitiveKind::kPullR; break;
    case PrimitiveKind::kPullR: s.kind = PrimitiveKind::kPullL; break;
    case PrimitiveKind::kTip: s.direction = -s.direction; break;
    case PrimitiveKind::kSideRotate: s.magnitude = -s.magnitude; break;
    case PrimitiveKind::kLift: break;
  }
  return s;
}

double draw_magnitude(Rng& rng, PrimitiveKind kind, const PrimitiveRanges& r, const sim::WorldConfig& c) {
  switch (kind) {
    case PrimitiveKind::kPushL:
    case PrimitiveKind::kPushR:
    case PrimitiveKind::kPullL:
    case PrimitiveKind::kPullR:
      return rng.uniform(r.push_distance_frac.min, r.push_distance_frac.max) * c.arena_width;
    case PrimitiveKind::kLift:
      return rng.uniform(r.lift_height_frac.min, r.lift_height_frac.max) * c.arena_height;
    case PrimitiveKind::kSideRotate: {
      const double a = rng.uniform(r.rotate_angle_deg.min, r.rotate_angle_deg.max) * kDeg;
      return rng.bernoulli(0.5) ? a : -a;
    }
    case PrimitiveKind::kTip: return 0.0;
  }
  return 0.0;
}

}  // namespace

std::string_view to_string(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::kPushL: return "PushL";
    case PrimitiveKind::kPushR: return "PushR";
    case PrimitiveKind::kPullL: return "PullL";
    case PrimitiveKind::kPullR: return "PullR";
    case PrimitiveKind::kLift: return "Lift";
    case PrimitiveKind::kTip: return "Tip";
    case PrimitiveKind::kSideRotate: return "SideRotate";
  }
  return "?";
}

PrimitiveKind kind_from_string(std::string_view name) {
  for (auto k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown primitive kind '" + std::string(name) + "'");
}

std::string_view to_string(ScriptPhase p) {
  switch (p) {
    case ScriptPhase::kApproach: return "Approach";
    case ScriptPhase::kEngage: return "Engage";
    case ScriptPhase::kManipulate: return "Manipulate";
    case ScriptPhase::kRetreat: return "Retreat";
    case ScriptPhase::kDone: return "Done";
  }
  return "?";
}

void to_json(nlohmann::json& j, const PrimitiveRanges& r) {
  auto rng = [](const Range& x) { return nlohmann::json::array({x.min, x.max}); };
  j = nlohmann::json{{"push_distance_frac", rng(r.push_distance_frac)},
                     {"lift_height_frac", rng(r.lift_height_frac)},
                     {"rotate_angle_deg", rng(r.rotate_angle_deg)},
                     {"speed_scale", rng(r.speed_scale)},
                     {"jitter_std", rng(r.jitter_std)},
                     {"approach_offset", rng(r.approach_offset)},
                     {"action_noise_frac", r.action_noise_frac},
                     {"dwell_min", r.dwell_min},
                     {"dwell_max", r.dwell_max},
                     {"stall_timeout", r.stall_timeout}};
}

void from_json(const nlohmann::json& j, PrimitiveRanges& r) {
  StrictObject o(j, "primitives.ranges");
  std::array<double, 2> a{};
  if (o.get("push_distance_frac", a)) r.push_distance_frac = {a[0], a[1]};
  if (o.get("lift_height_frac", a)) r.lift_height_frac = {a[0], a[1]};
  if (o.get("rotate_angle_deg", a)) r.rotate_angle_deg = {a[0], a[1]};
  if (o.get("speed_scale", a)) r.speed_scale = {a[0], a[1]};
  if (o.get("jitter_std", a)) r.jitter_std = {a[0], a[1]};
  if (o.get("approach_offset", a)) r.approach_offset = {a[0], a[1]};
  o.get("action_noise_frac", r.action_noise_frac);
  o.get("dwell_min", r.dwell_min);
  o.get("dwell_max", r.dwell_max);
  o.get("stall_timeout", r.stall_timeout);
  o.finish();
}

KindWeights weights_over(const std::vector<PrimitiveKind>& kinds) {
  KindWeights w{};
  if (kinds.empty()) throw ConfigError("weights_over: empty kind list");
  for (auto k : kinds) w[static_cast<std::size_t>(k)] += 1.0 / static_cast<double>(kinds.size());
  return w;
}

int motion_sign(const PrimitiveSpec& spec) {
  switch (spec.kind) {
    case PrimitiveKind::kPushL:
    case PrimitiveKind::kPullL: return -1;
    case PrimitiveKind::kPushR:
    case PrimitiveKind::kPullR: return 1;
    default: return 0;
  }
}

bool feasible(const PrimitiveSpec& spec, const sim::World& world) {
  const auto& c = world.config();
  if (spec.target_block < 0 || spec.target_block >= static_cast<int>(world.state().blocks.size())) return false;
  const Geom g = geom(world.state().blocks[static_cast<std::size_t>(spec.target_block)]);
  const double w = c.arena_width, h = c.arena_height, r = c.ego_radius;
  const double d = spec.magnitude;
  auto inside = [&](double x) { return x >= kMargin && x <= w - kMargin; };
  switch (spec.kind) {
    case PrimitiveKind::kPushL: return inside(g.left - d);
    case PrimitiveKind::kPushR: return inside(g.right + d);
    case PrimitiveKind::kPullL: return inside(g.left - d - 2 * r - 0.06);
    case PrimitiveKind::kPullR: return inside(g.right + d + 2 * r + 0.06);
    case PrimitiveKind::kLift: return d > 0 && g.top + d + 2 * r + 0.05 <= h;
    case PrimitiveKind::kTip: {
      const double pivot = spec.direction > 0 ? g.right : g.left;
      return inside(pivot + spec.direction * (2 * g.ext.y() + 2 * r + 0.04));
    }
    case PrimitiveKind::kSideRotate: {
      const int dir = topple_dir(spec);
      const double pivot = dir > 0 ? g.right : g.left;
      const double diag = 2 * g.ext.norm();
      return inside(pivot + dir * (diag + 2 * r + 0.04)) && g.top - 2 * g.ext.y() + diag + 2 * r + 0.05 <= h;
    }
  }
  return false;
}

PrimitiveSpec sample_primitive(Rng& rng, const sim::World& world, const KindWeights& weights,
                               const PrimitiveRanges& ranges) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw InputError("sample_primitive: weights must sum to 1");
  const auto& c = world.config();

  PrimitiveSpec spec;
  const double u = rng.uniform();
  double acc = 0.0;
  spec.kind = PrimitiveKind::kSideRotate;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc && weights[i] > 0) {
      spec.kind = kAllKinds[i];
      break;
    }
  }
  if (weights[static_cast<std::size_t>(spec.kind)] <= 0) {
    // Rounding left u past the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;) {
      if (weights[i] > 0) {
        spec.kind = kAllKinds[i];
        break;
      }
    }
  }
  spec.target_block = static_cast<int>(rng.uniform_int(0, c.n_blocks - 1));
  spec.approach_offset = Vec2(rng.uniform(ranges.approach_offset.min, ranges.approach_offset.max),
                              rng.uniform(ranges.approach_offset.min, ranges.approach_offset.max));
  spec.speed_scale = rng.uniform(ranges.speed_scale.min, ranges.speed_scale.max);
  spec.jitter_std = rng.uniform(ranges.jitter_std.min, ranges.jitter_std.max);
  spec.noise_std = ranges.action_noise_frac * c.arena_width;
  spec.dwell_steps = static_cast<int>(rng.uniform_int(ranges.dwell_min, ranges.dwell_max));
  spec.stall_timeout = ranges.stall_timeout;
  spec.direction = rng.bernoulli(0.5) ? 1 : -1;
  spec.magnitude = draw_magnitude(rng, spec.kind, ranges, c);
  spec.noise_seed = rng.next_u64();

  if (feasible(spec, world)) return spec;
  if (auto f = flipped(spec); feasible(f, world)) return f;
  for (int attempt = 0; attempt < 10; ++attempt) {
    spec.magnitude = draw_magnitude(rng, spec.kind, ranges, c);
    if (feasible(spec, world)) return spec;
    if (auto f = flipped(spec); feasible(f, world)) return f;
  }
  spec.kind = PrimitiveKind::kLift;
  const Geom g = geom(world.state().blocks[static_cast<std::size_t>(spec.target_block)]);
  const double room = c.arena_height - g.top - 2 * c.ego_radius - 0.05;
  spec.magnitude = std::clamp(draw_magnitude(rng, spec.kind, ranges, c), 0.05, std::max(0.05, room));
  return spec;
}

PrimitiveController::PrimitiveController(const PrimitiveSpec& spec, const sim::WorldConfig& config)
    : spec_(spec), cfg_(config), noise_(spec.noise_seed) {}

void PrimitiveController::enter(ScriptPhase p) {
  phase_ = p;
  phase_steps_ = 0;
  reached_ = false;
  no_progress_ = 0;
}

Vec2 PrimitiveController::advance_carrot(const Vec2& goal, double speed) {
  const Vec2 d = goal - carrot_;
  const double step = speed / cfg_.control_rate;
  const double n = d.norm();
  if (n <= step) {
    carrot_ = goal;
    reached_ = true;
  } else {
    carrot_ += d * (step / n);
    reached_ = false;
  }
  return carrot_;
}

void PrimitiveController::plan_approach(const sim::World& world) {
  const auto& blk = world.state().blocks[static_cast<std::size_t>(spec_.target_block)];
  const Geom g = geom(blk);
  const double r = cfg_.ego_radius;
  const Vec2 ego = world.state().ego.position;
  const Vec2 off = spec_.approach_offset;
  const double clear_y = std::min(g.top + r + 0.2 + off.y(), cfg_.arena_height - r - 0.01);
  block_start_ = blk.position;
  // Approach ends at a standoff pose well clear of the block; Engage closes the gap.
  constexpr double kStandoff = 0.12;
  auto jitter = [&](Vec2 p, bool keep_above) {
    const double jx = noise_.normal(0, spec_.jitter_std);
    const double jy = noise_.normal(0, spec_.jitter_std);
    p.x() += jx;
    p.y() += keep_above ? std::abs(jy) : jy;
    p.x() = std::clamp(p.x(), r, cfg_.arena_width - r);
    p.y() = std::clamp(p.y(), r, cfg_.arena_height - r);
    return p;
  };

  waypoints_.clear();
  waypoint_ = 0;
  const int side = engage_side(spec_);
  const bool push = spec_.kind == PrimitiveKind::kPushL || spec_.kind == PrimitiveKind::kPushR;
  nudging_ = push && needs_nudge(g, side, cfg_);
  if (side != 0 && !nudging_) {
    const double face = g.center.x() + side * g.ext.x();
    const double height = r + (push ? 0.5 * off.y() : 0.02 + off.y());
    Vec2 standoff(face + side * (r + kStandoff + (push ? off.x() : 0.0)), height);
    standoff.x() = std::clamp(standoff.x(), r, cfg_.arena_width - r);
    const bool same_side = side * (ego.x() - face) >= r + 0.05;
    if (!same_side) {
      waypoints_.push_back(jitter(Vec2(ego.x(), std::max(ego.y(), clear_y)), true));
      Vec2 over = jitter(Vec2(standoff.x(), clear_y), true);
      if (side * (over.x() - standoff.x()) < 0) over.x() = standoff.x();
      waypoints_.push_back(over);
    } else {
      Vec2 mid = jitter(0.5 * (ego + standoff), false);
      if (side * (mid.x() - face) < r + 0.05) mid.x() = standoff.x();
      waypoints_.push_back(mid);
    }
    waypoints_.push_back(standoff);
  } else {
    // Engaged from above: Lift grabs the top centre, rotations the edge away from the topple direction.
    Vec2 standoff(g.center.x() + (off.x() - 0.025), g.top + r + kStandoff);
    if (spec_.kind == PrimitiveKind::kTip || spec_.kind == PrimitiveKind::kSideRotate) {
      standoff.x() = g.center.x() - topple_dir(spec_) * (g.ext.x() - 0.05 - off.x());
    }
    if (ego.y() < clear_y - 0.05) waypoints_.push_back(jitter(Vec2(ego.x(), clear_y), true));
    waypoints_.push_back(jitter(Vec2(standoff.x(), clear_y), true));
    waypoints_.push_back(standoff);
  }
}

void PrimitiveController::stall_check(const sim::World&) {
  int cap = 0;
  switch (phase_) {
    case ScriptPhase::kApproach: cap = 45; break;
    case ScriptPhase::kEngage: cap = spec_.stall_timeout; break;
    case ScriptPhase::kManipulate: cap = 60; break;
    case ScriptPhase::kRetreat: cap = 25; break;
    case ScriptPhase::kDone: return;
  }
  if (phase_steps_ <= cap && no_progress_ < spec_.stall_timeout) return;
  if (phase_ == ScriptPhase::kRetreat) {
    enter(ScriptPhase::kDone);
  } else {
    grab_ = false;
    enter(ScriptPhase::kRetreat);
  }
}

PolicyOutput PrimitiveController::step(const sim::World& world) {
  const auto& st = world.state();
  const auto& blk = st.blocks[static_cast<std::size_t>(spec_.target_block)];
  const auto& ego = st.ego;
  const double r = cfg_.ego_radius;
  const double vmax = cfg_.ego_max_speed;
  const double approach_speed = vmax * std::clamp(0.6 + 0.3 * spec_.speed_scale, 0.1, 1.0);
  const double manip_speed = std::min(vmax, 0.5 + 0.9 * spec_.speed_scale);
  if (steps_ == 0) carrot_ = ego.position;
  ++steps_;
  ++phase_steps_;

  switch (phase_) {
    case ScriptPhase::kApproach: {
      grab_ = false;
      if (!settled_) {
        if ((!settled(blk) || ego.tether_active) && phase_steps_ < 15) break;
        settled_ = true;
        plan_approach(world);
      }
      const Vec2 goal = waypoints_[waypoint_];
      // Grab is held from the move over the block onward, as a human holds 'g' while
      // homing in; the tether only forms within grab_radius, which the standoff keeps clear of.
      const bool from_above = spec_.kind != PrimitiveKind::kPushL && spec_.kind != PrimitiveKind::kPushR;
      if ((from_above || nudging_) && waypoint_ + 2 >= waypoints_.size() &&
          world.nearest_block() == spec_.target_block) {
        grab_ = true;
      }
      advance_carrot(goal, approach_speed);
      const double tol = waypoint_ + 1 == waypoints_.size() ? 0.08 : 0.12;
      if (reached_ && (ego.position - goal).norm() < tol) {
        if (++waypoint_ == waypoints_.size()) enter(ScriptPhase::kEngage);
      }
      break;
    }
    case ScriptPhase::kEngage: {
      const int side = engage_side(spec_);
      const bool push = spec_.kind == PrimitiveKind::kPushL || spec_.kind == PrimitiveKind::kPushR;
      if (push && !nudging_) {
        const Geom g = geom(blk);
        const double face = side > 0 ? g.right : g.left;
        advance_carrot(Vec2(face + side * (r - 0.01), carrot_.y()), 0.5 * approach_speed);
        if (world.ego_block_distance(spec_.target_block) <= cfg_.contact_epsilon) {
          enter(ScriptPhase::kManipulate);
          manip_start_ = carrot_;
        }
      } else {
        grab_ = true;
        if (ego.tether_active) {
          enter(ScriptPhase::kManipulate);
          manip_start_ = carrot_ = ego.position;
          start_angle_ = blk.angle;
          swept_ = 0.0;
          dwell_left_ = spec_.dwell_steps;
          const Geom g = geom(blk);
          if (spec_.kind == PrimitiveKind::kTip || spec_.kind == PrimitiveKind::kSideRotate) {
            pivot_ = Vec2(topple_dir(spec_) > 0 ? g.right : g.left, blk.position.y() - g.ext.y());
            pivot_local_ = blk.to_local(pivot_);
            // Tips are lowered onto the side face under control rather than dropped.
            rotate_target_ = spec_.kind == PrimitiveKind::kTip ? std::numbers::pi / 2 : std::abs(spec_.magnitude);
          }
        } else {
          const Vec2 surf = sim::closest_surface_point(blk, ego.position);
          Vec2 dir = ego.position - surf;
          if (dir.norm() < 1e-9) dir = Vec2(0, 1);
          advance_carrot(surf + dir.normalized() * (r + 0.065), 0.5 * approach_speed);
        }
      }
      dwell_left_ = spec_.dwell_steps;
      break;
    }
    case ScriptPhase::kManipulate: {
      if (nudging_) {
        // Dragged from the top instead: the block is hemmed in against a wall.
        const Vec2 goal = manip_start_ + Vec2(motion_sign(spec_) * spec_.magnitude, 0.03);
        const bool was = reached_;
        advance_carrot(goal, std::min(0.6 * manip_speed, 0.1 + 1.5 * (goal - carrot_).norm()));
        reached_ = reached_ || was;
        if (!ego.tether_active || (reached_ && --dwell_left_ <= 0)) {
          grab_ = false;
          enter(ScriptPhase::kRetreat);
        }
        break;
      }
      const bool tethered_kind = spec_.kind != PrimitiveKind::kPushL && spec_.kind != PrimitiveKind::kPushR;
      if (tethered_kind && !ego.tether_active) {
        grab_ = false;
        enter(ScriptPhase::kRetreat);
        break;
      }
      switch (spec_.kind) {
        case PrimitiveKind::kPushL:
        case PrimitiveKind::kPushR: {
          // Pushes servo on the block's own displacement since it can slide ahead of the ego.
          const int sgn = motion_sign(spec_);
          const double remaining = spec_.magnitude - sgn * (blk.position.x() - block_start_.x());
          const double vx = sgn * blk.lin_velocity.x();
          const double coast = vx > 0 ? vx * vx / (2.0 * cfg_.friction_coeff * cfg_.gravity) : 0.0;
          if (!reached_ && remaining > 0.02 + coast) {
            // Tall blocks tip when they skid free of the ego, so they are pushed more gently.
            const Geom g = geom(blk);
            const double stability = std::clamp(g.ext.x() / (g.ext.y() * cfg_.friction_coeff), 0.4, 1.0);
            const double speed = std::min(0.6 * manip_speed * stability, 0.1 + 1.5 * remaining);
            advance_carrot(Vec2(carrot_.x() + sgn * 1.0, manip_start_.y()), speed);
            // Never lead far into the face, or noise turns the lead into a shove.
            const double face = sgn > 0 ? g.left - r : g.right + r;
            const double lead = std::clamp(0.3 * remaining - 0.01, 0.0, 0.08);
            carrot_.x() = sgn > 0 ? std::min(carrot_.x(), face + lead) : std::max(carrot_.x(), face - lead);
            reached_ = false;
          } else {
            // Back off while dwelling so action noise does not keep kicking the block.
            const bool was = reached_;
            if (!was) manip_start_ = Vec2(carrot_.x() - sgn * 0.15, carrot_.y());
            advance_carrot(manip_start_, manip_speed);
            reached_ = true;
            if (--dwell_left_ <= 0) enter(ScriptPhase::kRetreat);
          }
          break;
        }
        case PrimitiveKind::kPullL:
        case PrimitiveKind::kPullR: {
          const Vec2 goal = manip_start_ + Vec2(motion_sign(spec_) * spec_.magnitude, 0.0);
          const bool was = reached_;
          // Ease out so the block does not coast far past the end point.
          advance_carrot(goal, std::min(manip_speed, 0.15 + 2.0 * (goal - carrot_).norm()));
          reached_ = reached_ || was;
          if (reached_ && --dwell_left_ <= 0) {
            grab_ = false;
            enter(ScriptPhase::kRetreat);
          }
          break;
        }
        case PrimitiveKind::kLift: {
          const Vec2 goal = manip_start_ + Vec2(0.0, spec_.magnitude);
          const bool was = reached_;
          const double risen = carrot_.y() - manip_start_.y();
          const double left = goal.y() - carrot_.y();
          advance_carrot(goal, std::min({manip_speed, 0.3 + 3.0 * risen, 0.15 + 2.0 * left}));
          reached_ = reached_ || was;
          if (reached_ && --dwell_left_ <= 0) enter(ScriptPhase::kDone);
          break;
        }
        case PrimitiveKind::kTip:
        case PrimitiveKind::kSideRotate: {
          // The carrot leads the block's measured rotation about its (tracked) pivot corner.
          const bool tip = spec_.kind == PrimitiveKind::kTip;
          const int rot_sign = -topple_dir(spec_);
          // Track the corner horizontally only; following it upward would lift the block off the floor.
          const Vec2 corner = blk.to_world(pivot_local_);
          const Vec2 pivot = corner;
          const double turned = rot_sign * sim::wrap_angle(blk.angle - start_angle_);
          const double target = rotate_target_;
          const bool was = reached_;
          swept_ = std::clamp(target + 0.6 * (target - turned), std::min(turned + 20 * kDeg, target),
                              std::min(turned + 20 * kDeg, target + 40 * kDeg));
          advance_carrot(pivot + rotate(manip_start_ - pivot_, rot_sign * swept_), 0.8 * manip_speed);
          reached_ = was || turned >= target - (tip ? 5 : 3) * kDeg;
          const bool holding = std::abs(turned - target) <= 8 * kDeg;
          if (reached_ && holding && --dwell_left_ <= 0) {
            if (tip) {
              grab_ = false;
              enter(ScriptPhase::kRetreat);
            } else {
              enter(ScriptPhase::kDone);
            }
          }
          break;
        }
      }
      break;
    }
    case ScriptPhase::kRetreat: {
      grab_ = false;
      if (phase_steps_ == 1) {
        const int away = spec_.kind == PrimitiveKind::kTip ? 0 : sign_of(ego.position.x() - blk.position.x());
        Vec2 goal = ego.position + Vec2(away * 0.2, 0.35);
        goal.x() = std::clamp(goal.x(), r, cfg_.arena_width - r);
        goal.y() = std::clamp(goal.y(), r, cfg_.arena_height - r);
        manip_start_ = goal;
      }
      advance_carrot(manip_start_, approach_speed);
      if (reached_ && settled(blk)) enter(ScriptPhase::kDone);
      break;
    }
    case ScriptPhase::kDone: break;
  }

  // Stall detection: the ego persistently failing to track its commanded point.
  if (steps_ > 1 && (ego.position - last_target_).norm() > 0.1) {
    ++no_progress_;
  } else {
    no_progress_ = 0;
  }
  stall_check(world);

  PolicyOutput out;
  out.phase = phase_;
  out.action.grab = grab_;
  Vec2 target = carrot_;
  if (spec_.noise_std > 0) {
    target.x() += noise_.normal(0, spec_.noise_std);
    target.y() += noise_.normal(0, spec_.noise_std);
  }
  out.action.target_position = target;
  last_target_ = target;
  return out;
}

bool primitive_achieved(const PrimitiveSpec& spec, const sim::BlockState& before, const sim::BlockState& after,
                        double max_rise) {
  const double dtheta = sim::wrap_angle(after.angle - before.angle);
  switch (spec.kind) {
    case PrimitiveKind::kPushL:
    case PrimitiveKind::kPushR:
    case PrimitiveKind::kPullL:
    case PrimitiveKind::kPullR:
      return motion_sign(spec) * (after.position.x() - before.position.x()) >= 0.5 * spec.magnitude;
    case PrimitiveKind::kLift: return max_rise >= 0.5 * spec.magnitude;
    case PrimitiveKind::kTip: return std::abs(-spec.direction * dtheta - std::numbers::pi / 2) <= 20 * kDeg;
    case PrimitiveKind::kSideRotate: return std::abs(dtheta - spec.magnitude) <= 20 * kDeg;
  }
  return false;
}

}  // namespace plato::primitives
