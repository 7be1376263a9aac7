// Acceptance runner. `plato_acceptance --criterion N` runs one criterion and ends
// with a single "criterion N PASS|FAIL: ..." line; exit status 0 only on PASS.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "plato/cli/commands.hpp"
#include "plato/common/error.hpp"
#include "plato/common/rng.hpp"
#include "plato/eval/eval.hpp"
#include "plato/tensor/nn.hpp"

using namespace plato;
using primitives::PrimitiveKind;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::ostringstream summary;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      std::cout << "  failed: " << what << '\n';
    }
  }
};

tensor::Mat<double> randn(Eigen::Index r, Eigen::Index c, Rng& rng, double s = 1.0) {
  tensor::Mat<double> m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = s * rng.normal();
  return m;
}

// ---- 1: gradients ----

// Zero-initialized biases put ReLU units exactly on their kink when a whole layer
// below is inactive; checking at a jittered point keeps the loss differentiable.
void jitter(tensor::ParamSet<double>& ps, Rng& rng) {
  for (auto& p : ps) {
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] += 0.1 * rng.normal();
  }
}

Verdict numerics() {
  using namespace tensor;
  Verdict v;
  const auto t0 = Clock::now();
  constexpr int kConfigs = 10;
  constexpr double kTol = 1e-4;
  Rng rng(101);
  auto ri = [&](int lo, int hi) { return static_cast<int>(rng.uniform_int(lo, hi)); };
  std::map<std::string, double> worst;
  auto record = [&](const std::string& what, int i, const GradcheckResult& r) {
    worst[what] = std::max(worst[what], r.max_rel_error);
    v.require(r.max_rel_error <= kTol, what + " config " + std::to_string(i) + " rel " +
                                           std::to_string(r.max_rel_error) + " at " + r.worst_param);
  };

  for (int i = 0; i < kConfigs; ++i) {
    ParamSet<double> ps;
    std::vector<int> hidden(static_cast<std::size_t>(ri(1, 3)));
    for (auto& h : hidden) h = ri(2, 8);
    const int in = ri(2, 8), out = ri(1, 5), B = ri(1, 4);
    const MLP m = make_mlp(ps, "mlp", in, hidden, out, rng, i % 2 ? Activation::kRelu : Activation::kTanh);
    jitter(ps, rng);
    const Mat<double> x = randn(in, B, rng), y = randn(out, B, rng);
    record("MLP", i, gradcheck(ps, [&](Tape<double>& t) {
             const Var<double> d = sub(apply(t, ps, m, t.constant(x)), t.constant(y));
             return mean(mul(d, d));
           }));
  }
  for (int i = 0; i < kConfigs; ++i) {
    ParamSet<double> ps;
    const int in = ri(1, 5), H = ri(2, 7), B = ri(1, 3), T = 10;
    const GRULayer g = make_gru(ps, "gru", in, H, rng);
    const Mat<double> x = randn(in, T * B, rng), h0 = randn(H, B, rng, 0.3), y = randn(H, T * B, rng, 0.3);
    record("GRU10", i, gradcheck(ps, [&](Tape<double>& t) {
             const Var<double> d = sub(gru_sequence(bind(t, ps, g), t.constant(x), t.constant(h0), T), t.constant(y));
             return mean(mul(d, d));
           }));
  }
  for (int i = 0; i < kConfigs; ++i) {
    ParamSet<double> ps;
    const int in = ri(1, 5), H = ri(2, 6), B = ri(1, 3), T = ri(1, 8);
    const GRULayer f = make_gru(ps, "f", in, H, rng), b = make_gru(ps, "b", in, H, rng);
    const Mat<double> x = randn(in, T * B, rng), y = randn(2 * H, B, rng, 0.3);
    record("BiGRU", i, gradcheck(ps, [&](Tape<double>& t) {
             const Var<double> d = sub(bigru_encode(bind(t, ps, f), bind(t, ps, b), t.constant(x), T), t.constant(y));
             return mean(mul(d, d));
           }));
  }

  const playlog::PlayLog log = playlog::generate_play(playlog::GenerateConfig{}, 1, 40 * 100).log;
  for (auto variant : {models::Variant::kPLATO, models::Variant::kLMP, models::Variant::kGCBC}) {
    const std::string name = std::string("loss ") + std::string(models::to_string(variant));
    for (int i = 0; i < kConfigs; ++i) {
      models::ModelConfig c;
      c.H_int = c.H_pre = c.resample_interval = ri(3, 6);
      c.S = c.H_int / 2;
      c.latent_dim = ri(2, 4);
      c.policy_hidden = ri(3, 6);
      c.posterior_hidden = ri(3, 5);
      c.prior_width = ri(3, 6);
      c.prior_layers = ri(1, 2);
      c.batch_size = ri(1, 3);
      c.alpha = rng.uniform(0.3, 1.0);
      c.beta = rng.uniform(0.1, 1.0);
      c.float64 = true;
      Rng brng(static_cast<std::uint64_t>(1000 + i));
      const models::TrainBatch batch =
          models::is_plato(variant)
              ? models::plato_batch(log, segment::segment_log(log, segment::SmoothingConfig{}, c.H_int, c.H_pre, c.S),
                                    brng, c)
              : models::window_batch(log, brng, c);
      models::Model<double> m(variant, c, log.manifest.dims, models::Normalizer::fit(log),
                              static_cast<std::uint64_t>(i));
      jitter(m.params, rng);
      const Eigen::MatrixXd noise = randn(c.latent_dim, batch.B, rng);
      record(name, i, gradcheck(m.params, [&](Tape<double>& t) { return m.loss(t, batch, noise); }));
    }
  }
  const double secs = seconds_since(t0);
  v.require(secs < 60, "runtime " + std::to_string(secs) + " s >= 60 s");
  v.summary << kConfigs << " configs each, worst rel error";
  for (const auto& [k, e] : worst) v.summary << ' ' << k << ' ' << std::scientific << std::setprecision(1) << e;
  v.summary << std::fixed << std::setprecision(1) << ", " << secs << " s";
  return v;
}

// ---- 2: KL ----

double kl_quadrature(double mp, double sp, double mq, double sq) {
  auto logpdf = [](double x, double m, double s) {
    return -0.5 * std::log(2 * M_PI) - std::log(s) - 0.5 * (x - m) * (x - m) / (s * s);
  };
  auto f = [&](double x) {
    const double lp = logpdf(x, mp, sp);
    return std::exp(lp) * (lp - logpdf(x, mq, sq));
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, mp - 14 * sp, mp + 14 * sp, 15, 1e-13);
}

Verdict kl_oracle() {
  Verdict v;
  Rng rng(202);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const double mp = rng.uniform(-2, 2), mq = rng.uniform(-2, 2), lsp = rng.uniform(-1, 1), lsq = rng.uniform(-1, 1);
    const double closed = tensor::kl_diag_value(Eigen::VectorXd::Constant(1, mp), Eigen::VectorXd::Constant(1, lsp),
                                                Eigen::VectorXd::Constant(1, mq), Eigen::VectorXd::Constant(1, lsq));
    worst = std::max(worst, std::abs(closed - kl_quadrature(mp, std::exp(lsp), mq, std::exp(lsq))));
  }
  v.require(worst <= 1e-6, "quadrature abs error " + std::to_string(worst));
  double self = 0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd mu = randn(6, 1, rng), ls = randn(6, 1, rng);
    self = std::max(self, std::abs(tensor::kl_diag_value(mu, ls, mu, ls)));
  }
  v.require(self == 0.0, "KL(p,p) = " + std::to_string(self));
  double lowest = INFINITY;
  for (int i = 0; i < 100000; ++i) {
    const int d = static_cast<int>(rng.uniform_int(1, 8));
    lowest = std::min(lowest, tensor::kl_diag_value(randn(d, 1, rng, 2), randn(d, 1, rng), randn(d, 1, rng, 2),
                                                    randn(d, 1, rng)));
  }
  v.require(lowest >= 0.0, "negative KL " + std::to_string(lowest));
  v.summary << "max |closed - quadrature| " << std::scientific << std::setprecision(2) << worst << " on 100 pairs, KL(p,p) "
            << self << ", min KL over 1e5 pairs " << lowest;
  return v;
}

// ---- 3: segmentation ----

segment::ContactSeq random_seq(Rng& rng, int n, double p) {
  segment::ContactSeq c(static_cast<std::size_t>(n));
  bool on = rng.bernoulli(p);
  for (auto& x : c) {
    if (rng.bernoulli(0.3)) on = rng.bernoulli(p);
    x = on;
  }
  return c;
}

segment::ContactSeq brute_smooth(const segment::ContactSeq& raw, const segment::SmoothingConfig& cfg) {
  const int n = static_cast<int>(raw.size());
  segment::ContactSeq filled = raw;
  for (int i = 0; i < n; ++i) {
    if (raw[i]) continue;
    int l = i, r = i;
    while (l >= 0 && !raw[l]) --l;
    while (r < n && !raw[r]) ++r;
    if (l >= 0 && r < n && r - l - 1 <= cfg.gap_fill) filled[i] = 1;
  }
  segment::ContactSeq out(raw.size(), 0);
  for (int i = 0; i < n; ++i) {
    if (!filled[i]) continue;
    int l = i, r = i;
    while (l > 0 && filled[l - 1]) --l;
    while (r + 1 < n && filled[r + 1]) ++r;
    out[i] = r - l + 1 >= cfg.min_len;
  }
  return out;
}

std::vector<segment::InteractionInterval> brute_intervals(const segment::ContactSeq& c) {
  std::vector<segment::InteractionInterval> out;
  const int n = static_cast<int>(c.size());
  for (int i = 0; i < n; ++i) {
    if (!c[i] || (i > 0 && c[i - 1])) continue;
    int j = i;
    while (j + 1 < n && c[j + 1]) ++j;
    out.push_back({i, j});
  }
  return out;
}

Verdict segmentation() {
  Verdict v;
  Rng rng(303);
  int smooth_bad = 0, interval_bad = 0, partition_bad = 0, range_bad = 0, range_checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const segment::SmoothingConfig cfg{static_cast<int>(rng.uniform_int(0, 5)), static_cast<int>(rng.uniform_int(1, 5))};
    const segment::ContactSeq c = random_seq(rng, static_cast<int>(rng.uniform_int(0, 120)), rng.uniform(0.05, 0.95));
    smooth_bad += segment::smooth_contact(c, cfg) != brute_smooth(c, cfg);
    interval_bad += segment::find_interactions(c) != brute_intervals(c);
  }
  for (int i = 0; i < 1000; ++i) {
    const int L = static_cast<int>(rng.uniform_int(2, 150));
    const segment::PhaseSegmentation s = segment::segment_episode(random_seq(rng, L, rng.uniform(0.05, 0.9)), {3, 2});
    if (s.size() == 0) continue;
    std::vector<int> cover(static_cast<std::size_t>(L), 0);
    auto mark = [&](segment::Range r) {
      for (int t = r.begin; t <= r.end; ++t) ++cover[static_cast<std::size_t>(t)];
    };
    bool ok = true;
    for (std::size_t k = 0; k < s.size(); ++k) {
      mark(s.pre(k));
      mark(s.interaction(k));
      if (k + 1 < s.size()) ok = ok && s.post(k) == s.pre(k + 1);
    }
    mark(s.post(s.size() - 1));
    for (int n : cover) ok = ok && n == 1;
    partition_bad += !ok;
  }
  // Soft-boundary ranges by enumeration: a window start is valid when the whole
  // window lies in [c_s - S, c_e + S) clipped to the episode; goals run from c_e to
  // the step before the next interaction.
  for (int i = 0; i < 100; ++i) {
    const int H = static_cast<int>(rng.uniform_int(2, 30)), S = H / 2, L = static_cast<int>(rng.uniform_int(H, 250));
    const int c_s = static_cast<int>(rng.uniform_int(0, L - 1));
    const int c_e = static_cast<int>(rng.uniform_int(c_s, std::min(L - 1, c_s + 60)));
    segment::PhaseSegmentation seg;
    seg.length = L;
    seg.interactions = {{c_s, c_e}};
    const segment::WindowRanges r = segment::window_ranges(seg, 0, H, H, S);
    int lo = -1, hi = -1;
    for (int s = 0; s + H <= L; ++s) {
      if (s >= c_s - S && s + H <= c_e + S) {
        if (lo < 0) lo = s;
        hi = s;
      }
    }
    ++range_checked;
    if (lo < 0) {
      range_bad += r.admissible();
      continue;
    }
    bool ok = r.admissible() && r.tau_int_start.begin == lo && r.tau_int_start.end == hi;
    ok = ok && r.goal.begin == c_e && r.goal.end == L - 1;
    // Sampled windows stay inside the enumerated ranges and reach both ends.
    segment::DatasetSegmentation ds({seg}, H, H, S);
    std::set<int> starts;
    for (int d = 0; d < 4000; ++d) {
      const segment::WindowSample w = ds.sample(rng);
      ok = ok && w.tau_int_start >= lo && w.tau_int_start <= hi && w.goal_index >= c_e && w.goal_index <= L - 1;
      starts.insert(w.tau_int_start);
    }
    ok = ok && *starts.begin() == lo && *starts.rbegin() == hi;
    range_bad += !ok;
  }
  v.require(smooth_bad == 0, std::to_string(smooth_bad) + " smoothing mismatches");
  v.require(interval_bad == 0, std::to_string(interval_bad) + " interval mismatches");
  v.require(partition_bad == 0, std::to_string(partition_bad) + " partition failures");
  v.require(range_bad == 0, std::to_string(range_bad) + " soft-boundary range mismatches");
  v.summary << "smoothing " << smooth_bad << "/1000, intervals " << interval_bad << "/1000, partition " << partition_bad
            << "/1000, soft-boundary ranges " << range_bad << "/" << range_checked << " mismatched";
  return v;
}

// ---- 4: simulator ----

sim::Action random_action(Rng& rng, const sim::WorldConfig& c) {
  return {sim::Vec2(rng.uniform(0.0, c.arena_width), rng.uniform(0.0, c.arena_height)), rng.uniform() < 0.3};
}

void park_ego(sim::World& w) {
  w.mutable_state().ego.position = sim::Vec2(0.2, w.config().arena_height - 0.2);
  w.mutable_state().ego.velocity.setZero();
}

sim::Action hold(const sim::World& w) { return {w.state().ego.position, false}; }

Verdict simulator() {
  Verdict v;
  const auto t0 = Clock::now();
  const sim::WorldConfig c;
  Rng rng(404);
  int replay_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t seed = rng.next_u64();
    std::vector<sim::Action> seq;
    Rng arng(rng.next_u64());
    sim::Action a = random_action(arng, c);
    for (int t = 0; t < 60; ++t) {
      if (t % 5 == 0) a = random_action(arng, c);
      seq.push_back(a);
    }
    sim::World x(c, seed), y(c, seed);
    bool same = x == y;
    for (const auto& s : seq) {
      x.step(s);
      y.step(s);
      same = same && x.observe() == y.observe();
    }
    replay_bad += !(same && x == y);
  }

  double worst_fall = 0;
  for (int i = 0; i < 20; ++i) {
    sim::World w(c, 500 + static_cast<std::uint64_t>(i));
    park_ego(w);
    auto& b = w.mutable_state().blocks[0];
    b.position.y() = rng.uniform(2.2, 2.6);
    b.lin_velocity.setZero();
    b.ang_velocity = 0;
    const double y0 = b.position.y();
    const int steps = 5;
    for (int t = 0; t < steps; ++t) w.step(hold(w));
    const double ts = steps * c.control_dt(), expect = 0.5 * c.gravity * ts * ts;
    worst_fall = std::max(worst_fall, std::abs((y0 - w.state().blocks[0].position.y()) - expect) / expect);
  }

  double worst_drift = 0, worst_turn = 0;
  for (int i = 0; i < 50; ++i) {
    sim::World w(c, 600 + static_cast<std::uint64_t>(i));
    park_ego(w);
    const auto before = w.state().blocks;
    for (int t = 0; t < 100; ++t) w.step(hold(w));
    for (std::size_t k = 0; k < before.size(); ++k) {
      worst_drift = std::max(worst_drift, (w.state().blocks[k].position - before[k].position).norm());
      worst_turn = std::max(worst_turn, std::abs(w.state().blocks[k].angle - before[k].angle));
    }
  }

  int snap_bad = 0;
  for (int i = 0; i < 100; ++i) {
    sim::World w(c, 700 + static_cast<std::uint64_t>(i));
    for (int t = 0; t < 15; ++t) w.step(random_action(rng, c));
    sim::World r = sim::World::restore(w.snapshot());
    bool same = r == w && r.snapshot().bytes == w.snapshot().bytes;
    for (int t = 0; t < 30; ++t) {
      const sim::Action a = random_action(rng, c);
      w.step(a);
      r.step(a);
      same = same && w.observe() == r.observe();
    }
    snap_bad += !(same && r == w);
  }
  const double secs = seconds_since(t0);
  v.require(replay_bad == 0, std::to_string(replay_bad) + " replay mismatches");
  v.require(worst_fall <= 0.02, "free fall off by " + std::to_string(100 * worst_fall) + "%");
  v.require(worst_drift <= c.penetration_tolerance, "resting drift " + std::to_string(worst_drift));
  v.require(worst_turn <= 1e-3, "resting rotation " + std::to_string(worst_turn));
  v.require(snap_bad == 0, std::to_string(snap_bad) + " snapshot mismatches");
  v.require(secs < 120, "runtime " + std::to_string(secs) + " s");
  v.summary << std::setprecision(3) << "replay mismatches " << replay_bad << "/1000, free fall error "
            << 100 * worst_fall << "%, resting drift " << worst_drift << " (tol " << c.penetration_tolerance
            << "), snapshot mismatches " << snap_bad << "/100, " << std::fixed << std::setprecision(1) << secs << " s";
  return v;
}

// ---- 5: metric coherence ----

Verdict coherence() {
  Verdict v;
  const auto t0 = Clock::now();
  const sim::WorldConfig w;
  const eval::SuccessMetric m = eval::SuccessMetric::for_config(w);
  const playlog::Dims d;
  models::Bundle frozen(models::Variant::kPLATO, models::ModelConfig::defaults_for(models::Variant::kPLATO), d,
                        models::Normalizer::identity(d.robot + d.object), 42);
  constexpr int kN = 200;
  v.summary << std::fixed << std::setprecision(1) << "self/random %:";
  for (auto k : primitives::kAllKinds) {
    int self = 0, rnd = 0;
    for (int i = 0; i < kN; ++i) {
      const eval::GoalSpec g = eval::episode_goal(w, k, 505, i);
      self += eval::run_scripted_episode(g, m).success;
      rnd += eval::run_episode(frozen, g, m, static_cast<std::uint64_t>(i)).success;
    }
    const double ps = 100.0 * self / kN, pr = 100.0 * rnd / kN;
    const std::string name(primitives::to_string(k));
    std::cout << "  " << name << " scripted " << ps << "% frozen-random " << pr << "%\n";
    v.require(ps >= 90.0, name + " scripted self-success " + std::to_string(ps) + "% < 90%");
    v.require(pr <= 10.0, name + " frozen-random success " + std::to_string(pr) + "% > 10%");
    v.summary << ' ' << name << ' ' << ps << '/' << pr;
  }
  const double secs = seconds_since(t0);
  v.require(secs < 600, "runtime " + std::to_string(secs) + " s");
  v.summary << ", " << secs << " s";
  return v;
}

// ---- 6: desk-scale end to end ----

const std::vector<PrimitiveKind> kDeskKinds{PrimitiveKind::kPushL, PrimitiveKind::kPushR, PrimitiveKind::kLift};

playlog::GenerateConfig desk_collect() {
  playlog::GenerateConfig gc;
  gc.weights = primitives::weights_over(kDeskKinds);
  return gc;
}

Verdict end_to_end(const fs::path& work) {
  Verdict v;
  const auto t0 = Clock::now();
  const playlog::GenerateConfig gc = desk_collect();
  const playlog::PlayLog log = playlog::generate_play(gc, 1, 300LL * gc.max_episode_steps).log;
  std::cout << "  collected " << log.size() << " episodes, " << log.total_steps() << " steps\n";
  v.require(log.size() == 300, "collected " + std::to_string(log.size()) + " episodes");

  eval::EvaluateOptions eo;
  eo.primitives = kDeskKinds;
  eo.n_episodes = 100;
  eo.eval_seed = 7;
  eo.metric = eval::SuccessMetric::for_config(gc.world);
  std::vector<eval::ResultRow> rows;
  for (auto variant : {models::Variant::kPLATO, models::Variant::kLMP, models::Variant::kGCBC}) {
    const std::string name(models::to_string(variant));
    for (int seed = 0; seed < 2; ++seed) {
      const auto ts = Clock::now();
      models::TrainOptions o;
      o.seed = static_cast<std::uint64_t>(seed);
      models::TrainResult r = models::train(log, models::ModelConfig::defaults_for(variant), variant, o);
      models::save_bundle(r.model, (work / (name + "_" + std::to_string(seed) + ".ckpt")).string());
      const auto res = eval::evaluate_bundle(r.model, name, seed, gc.world, eo);
      rows.insert(rows.end(), res.begin(), res.end());
      int ok = 0;
      for (const auto& row : res) ok += row.success;
      std::cout << "  " << name << " seed " << seed << ": final loss " << std::defaultfloat << std::setprecision(4)
                << r.trace.back().total << ", success " << std::fixed << std::setprecision(1)
                << 100.0 * ok / res.size() << "%, " << seconds_since(ts) << " s\n"
                << std::defaultfloat << std::flush;
    }
  }
  {
    std::ofstream f(work / "results.csv");
    eval::write_results_csv(rows, f);
  }
  const eval::SuccessTable t = eval::aggregate(rows);
  eval::write_table(t, std::cout);
  const double plato = t.average("PLATO"), lmp = t.average("LMP"), gcbc = t.average("GCBC");
  const double secs = seconds_since(t0);
  v.require(plato >= 60.0, "PLATO average " + std::to_string(plato) + "% < 60%");
  v.require(plato >= lmp, "PLATO below LMP");
  v.require(plato >= gcbc, "PLATO below GCBC");
  v.require(secs <= 3 * 3600, "runtime " + std::to_string(secs) + " s");
  v.summary << std::fixed << std::setprecision(1) << "average success PLATO " << plato << "%, LMP " << lmp
            << "%, GCBC " << gcbc << "%, " << secs / 60 << " min";
  return v;
}

// ---- 7: ablation machinery and prior structure ----

Verdict ablation(const fs::path& work) {
  Verdict v;
  cli::RunConfig cfg;
  cfg.collect = desk_collect();
  cfg.episodes = 300;
  const std::string data = (work / "desk.playlog").string();
  std::ostringstream quiet;
  cli::collect(cfg, {data, 1, 300}, quiet);
  cli::AblateArgs a;
  a.data = data;
  a.out_dir = (work / "ablation").string();
  a.pct = 8.0;
  const segment::InjectionReport rep = cli::ablate_contact(cfg, a, std::cout);
  v.require(rep.achieved_pct >= 7.0 && rep.achieved_pct <= 9.0,
            "achieved pct " + std::to_string(rep.achieved_pct) + " outside [7, 9]");

  // Independent recount from the files on disk.
  const playlog::PlayLog before = playlog::load(data), after = playlog::load(a.out_dir + "/corrupted.playlog");
  std::vector<segment::ContactSeq> cb, ca;
  for (const auto& ep : before.episodes) cb.push_back(ep.contact);
  for (const auto& ep : after.episodes) ca.push_back(ep.contact);
  const segment::InjectionReport recount = segment::count_false_interactions(cb, ca, cfg.smoothing);
  v.require(recount.achieved_pct >= 7.0 && recount.achieved_pct <= 9.0,
            "recounted pct " + std::to_string(recount.achieved_pct));

  std::ifstream metrics(a.out_dir + "/plato_fc.ckpt.metrics.csv");
  int rows = 0, bad = 0;
  for (std::string line; std::getline(metrics, line);) {
    if (line.empty() || line[0] == '#' || line[0] == 's') continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    while (std::getline(ss, cell, ',')) bad += !std::isfinite(std::stod(cell));
    ++rows;
  }
  const int steps = cfg.model_for(models::Variant::kPLATO).steps;
  v.require(rows == steps && bad == 0,
            "FC run logged " + std::to_string(rows) + " rows, " + std::to_string(bad) + " non-finite");

  // Prior structure: perturb the robot part of the state only.
  const playlog::Dims d;
  int r_differs = 0, plato_differs = 0;
  models::Model<double> pr(models::Variant::kPLATO_R, models::ModelConfig::defaults_for(models::Variant::kPLATO_R), d,
                           models::Normalizer::identity(d.robot + d.object), 3);
  models::Model<double> pl(models::Variant::kPLATO, models::ModelConfig::defaults_for(models::Variant::kPLATO), d,
                           models::Normalizer::identity(d.robot + d.object), 3);
  Rng rng(707);
  for (int i = 0; i < 100; ++i) {
    Eigen::MatrixXd s = randn(d.robot + d.object, 1, rng), g = randn(d.object, 1, rng);
    Eigen::MatrixXd s2 = s;
    s2.topRows(d.robot) = randn(d.robot, 1, rng);
    auto mu = [&](models::Model<double>& m, const Eigen::MatrixXd& st) {
      tensor::Tape<double> t;
      return Eigen::MatrixXd(m.prior(t, t.constant(m.prior_input(st, g))).mu.value());
    };
    r_differs += mu(pr, s) != mu(pr, s2);
    plato_differs += mu(pl, s) != mu(pl, s2);
  }
  v.require(r_differs == 100, "PLATO_R prior ignored robot state in " + std::to_string(100 - r_differs) + "/100");
  v.require(plato_differs == 0, "PLATO prior changed with robot state in " + std::to_string(plato_differs) + "/100");
  v.summary << std::fixed << std::setprecision(2) << "achieved false-interaction pct " << rep.achieved_pct
            << " (recount " << recount.achieved_pct << "), FC run " << rows << " finite rows, PLATO_R prior changed "
            << r_differs << "/100, PLATO prior changed " << plato_differs << "/100";
  return v;
}

// ---- 8: overfit ----

struct OverfitRun {
  double mae = 0, mean_abs = 0;
};

OverfitRun overfit_once(const playlog::PlayLog& log, models::Variant variant, double lr) {
  models::ModelConfig c = models::ModelConfig::defaults_for(variant);
  c.batch_size = 10;
  c.steps = 2000;
  c.lr = lr;
  Rng rng(808);
  const models::TrainBatch batch =
      models::is_plato(variant)
          ? models::plato_batch(log, segment::segment_log(log, segment::SmoothingConfig{}, c.H_int, c.H_pre, c.S), rng,
                                c)
          : models::window_batch(log, rng, c);
  models::TrainOptions o;
  o.seed = 8;
  o.fixed_batch = &batch;
  const models::TrainResult r = models::train(log, c, variant, o);
  return {r.trace.back().L_int, batch.int_actions.cwiseAbs().mean()};
}

// The check memorizes 10 windows in 2000 steps, which the training learning rate
// (3e-4) is too slow for; it runs at 1e-3 and reports the training rate alongside.
Verdict overfit() {
  Verdict v;
  const auto t0 = Clock::now();
  constexpr double kLr = 1e-3;
  const playlog::PlayLog log = playlog::generate_play(playlog::GenerateConfig{}, 8, 60LL * 100).log;
  v.summary << std::setprecision(3) << "MAE / mean|a| at lr " << kLr << ":";
  for (auto variant : {models::Variant::kPLATO, models::Variant::kPLATO_PRE, models::Variant::kPLATO_R,
                       models::Variant::kLMP, models::Variant::kGCBC}) {
    const std::string name(models::to_string(variant));
    const OverfitRun r = overfit_once(log, variant, kLr);
    const OverfitRun slow = overfit_once(log, variant, models::ModelConfig::defaults_for(variant).lr);
    const double ratio = r.mae / r.mean_abs;
    std::cout << "  " << name << " MAE " << r.mae << " mean|a| " << r.mean_abs << " ratio " << ratio
              << " (training lr: ratio " << slow.mae / slow.mean_abs << ")\n";
    v.require(ratio <= 0.05, name + " ratio " + std::to_string(ratio));
    v.summary << ' ' << name << ' ' << ratio;
  }
  const double secs = seconds_since(t0);
  v.require(secs < 300, "runtime " + std::to_string(secs) + " s");
  v.summary << ", " << std::fixed << std::setprecision(1) << secs << " s";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int criterion = 0;
  std::string work = (fs::temp_directory_path() / "plato_acceptance").string();
  app.add_option("--criterion", criterion, "1-8")->required()->check(CLI::Range(1, 8));
  app.add_option("--work", work, "scratch directory for logs and checkpoints");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  Verdict v;
  try {
    switch (criterion) {
      case 1: v = numerics(); break;
      case 2: v = kl_oracle(); break;
      case 3: v = segmentation(); break;
      case 4: v = simulator(); break;
      case 5: v = coherence(); break;
      case 6: v = end_to_end(work); break;
      case 7: v = ablation(work); break;
      case 8: v = overfit(); break;
    }
  } catch (const std::exception& e) {
    v.pass = false;
    v.summary << "error: " << e.what();
  }
  std::cout << "criterion " << criterion << (v.pass ? " PASS: " : " FAIL: ") << v.summary.str() << std::endl;
  return v.pass ? 0 : 1;
}
