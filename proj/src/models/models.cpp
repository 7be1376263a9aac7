#include "plato/models/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>

#include "plato/common/error.hpp"
#include "plato/common/json_fields.hpp"

namespace plato::models {

using nlohmann::json;
using tensor::DiagGaussian;
using tensor::Mat;
using tensor::Tape;
using tensor::Var;

// ---- variant ----

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kPLATO: return "PLATO";
    case Variant::kPLATO_PRE: return "PLATO_PRE";
    case Variant::kPLATO_R: return "PLATO_R";
    case Variant::kLMP: return "LMP";
    case Variant::kGCBC: return "GCBC";
  }
  return "?";
}

Variant variant_from_string(std::string_view name) {
  std::string n;
  for (char c : name) n.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (n == "PLAY_LMP") n = "LMP";
  if (n == "PLAY_GCBC") n = "GCBC";
  for (Variant v : {Variant::kPLATO, Variant::kPLATO_PRE, Variant::kPLATO_R, Variant::kLMP, Variant::kGCBC}) {
    if (n == to_string(v)) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

// ---- config ----

ModelConfig ModelConfig::defaults_for(Variant v) {
  ModelConfig c;
  if (v == Variant::kGCBC) c.policy_hidden = 128;
  return c;
}

void ModelConfig::validate() const {
  if (!(beta >= 0)) throw ConfigError("model.beta must be >= 0");
  if (!(alpha >= 0)) throw ConfigError("model.alpha must be >= 0");
  if (H_int < 1 || H_pre < 1) throw ConfigError("model.H_int and model.H_pre must be >= 1");
  if (S < 0) throw ConfigError("model.S must be >= 0");
  if (latent_dim < 1 || policy_hidden < 1 || posterior_hidden < 1 || prior_width < 1 || prior_layers < 0) {
    throw ConfigError("model widths must be positive");
  }
  if (resample_interval < 1 || resample_interval > H_int) {
    throw ConfigError("model.resample_interval must be in [1, H_int]");
  }
  if (!(lr > 0)) throw ConfigError("model.lr must be positive");
  if (batch_size < 1) throw ConfigError("model.batch_size must be >= 1");
  if (steps < 0) throw ConfigError("model.steps must be >= 0");
}

void to_json(json& j, const ModelConfig& c) {
  j = {{"beta", c.beta},
       {"alpha", c.alpha},
       {"H_int", c.H_int},
       {"H_pre", c.H_pre},
       {"S", c.S},
       {"latent_dim", c.latent_dim},
       {"policy_hidden", c.policy_hidden},
       {"posterior_hidden", c.posterior_hidden},
       {"prior_width", c.prior_width},
       {"prior_layers", c.prior_layers},
       {"resample_interval", c.resample_interval},
       {"lr", c.lr},
       {"batch_size", c.batch_size},
       {"steps", c.steps},
       {"float64", c.float64},
       {"prior_mean", c.prior_mean}};
}

void from_json(const json& j, ModelConfig& c) {
  StrictObject o(j, "model");
  o.get("beta", c.beta);
  o.get("alpha", c.alpha);
  o.get("H_int", c.H_int);
  o.get("H_pre", c.H_pre);
  o.get("S", c.S);
  o.get("latent_dim", c.latent_dim);
  o.get("policy_hidden", c.policy_hidden);
  o.get("posterior_hidden", c.posterior_hidden);
  o.get("prior_width", c.prior_width);
  o.get("prior_layers", c.prior_layers);
  o.get("resample_interval", c.resample_interval);
  o.get("lr", c.lr);
  o.get("batch_size", c.batch_size);
  o.get("steps", c.steps);
  o.get("float64", c.float64);
  o.get("prior_mean", c.prior_mean);
  o.finish();
  c.validate();
}

// ---- normalizer ----

Normalizer Normalizer::fit(const playlog::PlayLog& log) {
  const int d = log.manifest.dims.robot + log.manifest.dims.object;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
  double n = 0;
  for (const auto& ep : log.episodes) {
    for (int t = 0; t < ep.length(); ++t) {
      const Eigen::VectorXd s = ep.state(t).cast<double>();
      sum += s;
      sq += s.cwiseAbs2();
      n += 1;
    }
  }
  if (n == 0) throw DataError("cannot fit a normalizer on an empty log");
  Normalizer out;
  out.mean = sum / n;
  const Eigen::VectorXd var = (sq / n - out.mean.cwiseAbs2()).cwiseMax(0.0);
  out.std = var.cwiseSqrt().cwiseMax(1e-3);
  return out;
}

Normalizer Normalizer::identity(int dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

void to_json(json& j, const Normalizer& n) {
  j = {{"mean", std::vector<double>(n.mean.data(), n.mean.data() + n.mean.size())},
       {"std", std::vector<double>(n.std.data(), n.std.data() + n.std.size())}};
}

void from_json(const json& j, Normalizer& n) {
  const auto m = j.at("mean").get<std::vector<double>>();
  const auto s = j.at("std").get<std::vector<double>>();
  if (m.size() != s.size()) throw FormatError(FormatError::Kind::kDimMismatch, "normalizer mean/std sizes differ");
  n.mean = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  n.std = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

// ---- batches ----

Eigen::Vector3d policy_target(const playlog::Episode& ep, int t) {
  return {static_cast<double>(ep.action(t, 0)) - ep.robot(t, 0), static_cast<double>(ep.action(t, 1)) - ep.robot(t, 1),
          static_cast<double>(ep.action(t, 2))};
}

namespace {

TrainBatch empty_batch(const playlog::Dims& d, int B, int H_int, int H_pre) {
  TrainBatch b;
  b.B = B;
  b.H_int = H_int;
  b.H_pre = H_pre;
  const int sd = d.robot + d.object;
  b.int_states.resize(sd, H_int * B);
  b.int_actions.resize(3, H_int * B);
  b.goal.resize(d.object, B);
  if (H_pre > 0) {
    b.pre_states.resize(sd, H_pre * B);
    b.pre_actions.resize(3, H_pre * B);
    b.pre_mask.resize(3, H_pre * B);
  }
  return b;
}

}  // namespace

TrainBatch plato_batch(const playlog::PlayLog& log, const segment::DatasetSegmentation& seg, Rng& rng,
                       const ModelConfig& cfg) {
  if (seg.H_int() != cfg.H_int || seg.H_pre() != cfg.H_pre || seg.S() != cfg.S) {
    throw UsageError("plato_batch: segmentation windows differ from the model config");
  }
  const int B = cfg.batch_size;
  TrainBatch b = empty_batch(log.manifest.dims, B, cfg.H_int, cfg.H_pre);
  for (int i = 0; i < B; ++i) {
    const segment::WindowSample w = seg.sample(rng);
    const auto& ep = log.episodes[static_cast<std::size_t>(w.episode)];
    for (int k = 0; k < cfg.H_int; ++k) {
      const int t = w.tau_int_start + k;
      b.int_states.col(k * B + i) = ep.state(t).cast<double>();
      b.int_actions.col(k * B + i) = policy_target(ep, t);
    }
    for (int k = 0; k < cfg.H_pre; ++k) {
      const int t = w.pre_index(k);
      b.pre_states.col(k * B + i) = ep.state(t).cast<double>();
      b.pre_actions.col(k * B + i) = policy_target(ep, t);
      b.pre_mask.col(k * B + i).setConstant(k < w.pre_pad ? 0.0 : 1.0);
    }
    b.goal.col(i) = ep.object.row(w.goal_index).transpose().cast<double>();
    b.samples.push_back(w);
  }
  return b;
}

TrainBatch window_batch(const playlog::PlayLog& log, Rng& rng, const ModelConfig& cfg) {
  const int H = cfg.H_int;
  std::vector<std::int64_t> cum;
  std::int64_t total = 0;
  for (const auto& ep : log.episodes) {
    total += std::max(0, ep.length() - H + 1);
    cum.push_back(total);
  }
  if (total == 0) throw DataError("no episode is at least " + std::to_string(H) + " steps long");
  const int B = cfg.batch_size;
  TrainBatch b = empty_batch(log.manifest.dims, B, H, 0);
  for (int i = 0; i < B; ++i) {
    const std::int64_t pick = rng.uniform_int(0, total - 1);
    const auto e = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin());
    const int start = static_cast<int>(pick - (e == 0 ? 0 : cum[e - 1]));
    const auto& ep = log.episodes[e];
    for (int k = 0; k < H; ++k) {
      b.int_states.col(k * B + i) = ep.state(start + k).cast<double>();
      b.int_actions.col(k * B + i) = policy_target(ep, start + k);
    }
    b.goal.col(i) = ep.object.row(start + H - 1).transpose().cast<double>();
    b.windows.emplace_back(static_cast<int>(e), start);
  }
  return b;
}

// ---- model ----

template <typename S>
Model<S>::Model(Variant variant, const ModelConfig& cfg, const playlog::Dims& dims, const Normalizer& norm,
                std::uint64_t init_seed)
    : variant_(variant), cfg_(cfg), dims_(dims), norm_(norm) {
  cfg_.validate();
  if (norm_.mean.size() != state_dim() || norm_.std.size() != state_dim()) {
    throw InputError("normalizer has " + std::to_string(norm_.mean.size()) + " dims, state has " +
                     std::to_string(state_dim()));
  }
  Rng rng(init_seed);
  const int z = has_latent(variant_) ? cfg_.latent_dim : 0;
  policy_gru = tensor::make_gru(params, "policy.gru", state_dim() + dims_.object + z, cfg_.policy_hidden, rng);
  policy_head = tensor::make_linear(params, "policy.head", cfg_.policy_hidden, 3, rng);
  if (!has_latent(variant_)) return;
  post_fwd_ = tensor::make_gru(params, "posterior.fwd", posterior_input_dim(), cfg_.posterior_hidden, rng);
  post_bwd_ = tensor::make_gru(params, "posterior.bwd", posterior_input_dim(), cfg_.posterior_hidden, rng);
  post_mu_ = tensor::make_linear(params, "posterior.mu", 2 * cfg_.posterior_hidden, z, rng);
  post_ls_ = tensor::make_linear(params, "posterior.log_sigma", 2 * cfg_.posterior_hidden, z, rng, -1.0);
  prior_ = tensor::make_mlp(params, "prior", prior_input_dim(), std::vector<int>(cfg_.prior_layers, cfg_.prior_width),
                            2 * z, rng);
  params.at(prior_.layers.back().b).value.bottomRows(z).setConstant(S(-1));
}

template <typename S>
int Model<S>::prior_input_dim() const {
  switch (variant_) {
    case Variant::kPLATO:
    case Variant::kPLATO_PRE: return 2 * dims_.object;
    case Variant::kPLATO_R: return 2 * dims_.object + dims_.robot;
    case Variant::kLMP: return state_dim() + dims_.object;
    case Variant::kGCBC: return 0;
  }
  return 0;
}

template <typename S>
Eigen::MatrixXd Model<S>::normalize_states(const Eigen::MatrixXd& s) const {
  return (s.colwise() - norm_.mean).array().colwise() / norm_.std.array();
}

template <typename S>
Eigen::MatrixXd Model<S>::normalize_objects(const Eigen::MatrixXd& o) const {
  const auto m = norm_.mean.tail(dims_.object);
  const auto sd = norm_.std.tail(dims_.object);
  return (o.colwise() - m).array().colwise() / sd.array();
}

template <typename S>
Eigen::MatrixXd Model<S>::prior_input(const Eigen::MatrixXd& state, const Eigen::MatrixXd& goal) const {
  const Eigen::Index B = state.cols();
  const Eigen::MatrixXd o = normalize_objects(state.bottomRows(dims_.object));
  const Eigen::MatrixXd g = normalize_objects(goal);
  Eigen::MatrixXd in(prior_input_dim(), B);
  switch (variant_) {
    case Variant::kPLATO:
    case Variant::kPLATO_PRE: in << o, g; break;
    case Variant::kPLATO_R: in << o, g, normalize_states(state).topRows(dims_.robot); break;
    case Variant::kLMP: in << normalize_states(state), g; break;
    case Variant::kGCBC: throw UsageError("GCBC has no prior");
  }
  return in;
}

template <typename S>
DiagGaussian<S> Model<S>::posterior(Tape<S>& t, const Var<S>& states, int steps) {
  if (!has_latent(variant_)) throw UsageError("GCBC has no posterior");
  const Var<S> code = tensor::bigru_encode(tensor::bind(t, params, post_fwd_), tensor::bind(t, params, post_bwd_),
                                           states, steps);
  return {tensor::apply(t, params, post_mu_, code), tensor::apply(t, params, post_ls_, code)};
}

template <typename S>
DiagGaussian<S> Model<S>::prior(Tape<S>& t, const Var<S>& input) {
  if (!has_latent(variant_)) throw UsageError("GCBC has no prior");
  const Var<S> y = tensor::apply(t, params, prior_, input);
  const int z = cfg_.latent_dim;
  return {tensor::slice_rows(y, 0, z), tensor::slice_rows(y, z, z)};
}

template <typename S>
typename Model<S>::PolicyVars Model<S>::policy(Tape<S>& t, const Eigen::MatrixXd& states, const Eigen::MatrixXd& goal,
                                               const std::optional<Var<S>>& z, int steps, const Var<S>& h0) {
  if (has_latent(variant_) != z.has_value()) throw UsageError("policy: latent presence does not match the variant");
  const Eigen::Index B = goal.cols();
  std::vector<Var<S>> parts{t.constant(normalize_states(states).template cast<S>()),
                            t.constant(normalize_objects(goal).replicate(1, steps).template cast<S>())};
  if (z) parts.push_back(tensor::tile_cols(*z, steps));
  if (states.cols() != steps * B) throw InputError("policy: states do not hold steps x batch columns");
  const Var<S> hs = tensor::gru_sequence(tensor::bind(t, params, policy_gru), tensor::concat_rows(parts), h0, steps);
  return {tensor::apply(t, params, policy_head, hs), hs};
}

template <typename S>
Var<S> Model<S>::loss(Tape<S>& t, const TrainBatch& batch, const Eigen::MatrixXd& noise, LossParts* parts) {
  const int B = batch.B;
  const auto zero_h = [&] { return t.constant(Mat<S>::Zero(cfg_.policy_hidden, B)); };
  const auto target = [&](const Eigen::MatrixXd& a) { return t.constant(a.template cast<S>()); };
  if (batch.int_states.rows() != state_dim() || batch.int_states.cols() != batch.H_int * B) {
    throw InputError("loss: batch state shape does not match the model");
  }

  LossParts lp;
  Var<S> total, L_int, L_pre, kl;
  if (variant_ == Variant::kGCBC) {
    const auto pv = policy(t, batch.int_states, batch.goal, std::nullopt, batch.H_int, zero_h());
    L_int = tensor::abs_mean(tensor::sub(pv.out, target(batch.int_actions)));
    total = L_int;
  } else {
    if (noise.rows() != cfg_.latent_dim || noise.cols() != B) throw InputError("loss: noise must be latent_dim x B");
    const bool plato = is_plato(variant_);
    if (plato && (batch.pre_states.cols() != batch.H_pre * B || batch.samples.empty())) {
      throw UsageError("loss: PLATO variants need a segmented batch with pre windows");
    }
    DiagGaussian<S> q;
    if (variant_ == Variant::kPLATO_PRE) {
      Eigen::MatrixXd seq(state_dim(), (batch.H_pre + batch.H_int) * B);
      seq << batch.pre_states, batch.int_states;
      q = posterior(t, t.constant(normalize_states(seq).template cast<S>()), batch.H_pre + batch.H_int);
    } else {
      q = posterior(t, t.constant(normalize_states(batch.int_states).template cast<S>()), batch.H_int);
    }
    const Var<S> z = tensor::reparam_sample(q, Mat<S>(noise.template cast<S>()));
    const DiagGaussian<S> p = prior(t, t.constant(prior_input(batch.int_states.leftCols(B), batch.goal).template cast<S>()));
    kl = tensor::kl_diag(q, p);

    const auto pv = policy(t, batch.int_states, batch.goal, z, batch.H_int, zero_h());
    L_int = tensor::abs_mean(tensor::sub(pv.out, target(batch.int_actions)));
    total = tensor::add(L_int, tensor::scale(kl, static_cast<S>(cfg_.beta)));
    if (plato) {
      if (batch.pre_mask.sum() > 0) {
        const auto pp = policy(t, batch.pre_states, batch.goal, z, batch.H_pre, zero_h());
        L_pre = tensor::masked_abs_mean(tensor::sub(pp.out, target(batch.pre_actions)),
                                        Mat<S>(batch.pre_mask.template cast<S>()));
        total = tensor::add(total, tensor::scale(L_pre, static_cast<S>(cfg_.alpha)));
      }
    }
  }
  if (parts) {
    lp.total = static_cast<double>(total.item());
    lp.L_int = static_cast<double>(L_int.item());
    lp.L_pre = L_pre.valid() ? static_cast<double>(L_pre.item()) : 0.0;
    lp.KL = kl.valid() ? static_cast<double>(kl.item()) : 0.0;
    *parts = lp;
  }
  return total;
}

template <typename S>
json Model<S>::header() const {
  return {{"variant", std::string(to_string(variant_))},
          {"model", cfg_},
          {"dims", {{"robot", dims_.robot}, {"object", dims_.object}, {"action", dims_.action}}},
          {"normalizer", norm_}};
}

template class Model<float>;
template class Model<double>;

void save_bundle(const Bundle& m, const std::string& path, const json& extra) {
  json h = m.header();
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) h[it.key()] = it.value();
  }
  tensor::save_checkpoint(path, h, m.params);
}

Bundle load_bundle(const std::string& path, json* header) {
  tensor::Checkpoint ck = tensor::load_checkpoint(path);
  try {
    const Variant v = variant_from_string(ck.header.at("variant").get<std::string>());
    ModelConfig cfg = ck.header.at("model").get<ModelConfig>();
    playlog::Dims d;
    d.robot = ck.header.at("dims").at("robot").get<int>();
    d.object = ck.header.at("dims").at("object").get<int>();
    d.action = ck.header.at("dims").at("action").get<int>();
    const Normalizer norm = ck.header.at("normalizer").get<Normalizer>();
    Bundle m(v, cfg, d, norm, 0);
    m.params.assign(ck.params);
    if (header) *header = ck.header;
    return m;
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, "checkpoint header: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw FormatError(FormatError::Kind::kMalformed, "checkpoint header: " + std::string(e.what()));
  }
}

// ---- training ----

namespace {

template <typename S>
std::vector<LossParts> train_loop(Model<S>& m, const playlog::PlayLog& log, const TrainOptions& opt,
                                  const segment::DatasetSegmentation* seg) {
  const ModelConfig& cfg = m.config();
  tensor::Adam<S> adam(m.params, tensor::AdamConfig{cfg.lr});
  Rng batch_rng(derive_seed(opt.seed, 2));
  Rng noise_rng(derive_seed(opt.seed, 3));
  std::vector<LossParts> trace;
  trace.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 0; step < cfg.steps; ++step) {
    const TrainBatch sampled = opt.fixed_batch ? TrainBatch{}
                               : seg              ? plato_batch(log, *seg, batch_rng, cfg)
                                                  : window_batch(log, batch_rng, cfg);
    const TrainBatch& batch = opt.fixed_batch ? *opt.fixed_batch : sampled;
    Eigen::MatrixXd noise(cfg.latent_dim, batch.B);
    if (has_latent(m.variant())) {
      for (Eigen::Index k = 0; k < noise.size(); ++k) noise.data()[k] = noise_rng.normal();
    }
    m.params.zero_grad();
    Tape<S> t;
    LossParts lp;
    const Var<S> loss = m.loss(t, batch, noise, &lp);
    const std::pair<const char*, double> comps[] = {
        {"L_int", lp.L_int}, {"L_pre", lp.L_pre}, {"KL", lp.KL}, {"total", lp.total}};
    for (const auto& [name, v] : comps) {
      if (!std::isfinite(v)) {
        throw NumericError("non-finite " + std::string(name) + " at step " + std::to_string(step) +
                           " (L_int=" + std::to_string(lp.L_int) + " L_pre=" + std::to_string(lp.L_pre) +
                           " KL=" + std::to_string(lp.KL) + ")");
      }
    }
    t.backward(loss);
    adam.step();
    trace.push_back(lp);
    if (opt.metrics) {
      *opt.metrics << step << ',' << lp.total << ',' << lp.L_int << ',' << lp.L_pre << ',' << lp.KL << '\n';
    }
    if (opt.progress) opt.progress(step, lp);
  }
  return trace;
}

}  // namespace

TrainResult train(const playlog::PlayLog& log, const ModelConfig& cfg, Variant variant, const TrainOptions& opt) {
  cfg.validate();
  opt.smoothing.validate();
  if (log.size() == 0) throw DataError("training log is empty");
  std::optional<segment::DatasetSegmentation> seg;
  if (is_plato(variant) && !opt.fixed_batch) {
    seg.emplace(segment::segment_log(log, opt.smoothing, cfg.H_int, cfg.H_pre, cfg.S));
    if (seg->admissible_count() == 0) {
      throw DataError("no interaction admits a " + std::to_string(cfg.H_int) + "-step window (" +
                      std::to_string(seg->interaction_count()) + " interactions found)");
    }
  }
  const Normalizer norm = Normalizer::fit(log);
  const std::uint64_t init_seed = derive_seed(opt.seed, 1);

  if (opt.metrics) {
    *opt.metrics << "# variant=" << to_string(variant) << " seed=" << opt.seed
                 << " config_hash=" << log.manifest.config_hash << '\n'
                 << "# model=" << json(cfg).dump() << '\n'
                 << "step,total,L_int,L_pre,KL\n"
                 << std::setprecision(9);
  }
  const segment::DatasetSegmentation* sp = seg ? &*seg : nullptr;
  if (cfg.float64) {
    Model<double> m(variant, cfg, log.manifest.dims, norm, init_seed);
    auto trace = train_loop(m, log, opt, sp);
    Bundle out(variant, cfg, log.manifest.dims, norm, init_seed);
    out.params.assign(m.params);
    return {std::move(out), std::move(trace)};
  }
  Bundle m(variant, cfg, log.manifest.dims, norm, init_seed);
  auto trace = train_loop(m, log, opt, sp);
  return {std::move(m), std::move(trace)};
}

// ---- actor ----

Actor::Actor(Bundle& model, const Eigen::VectorXd& goal_object, std::uint64_t noise_seed)
    : model_(model), goal_(goal_object), noise_(noise_seed) {
  if (goal_object.size() != model.dims().object) {
    throw InputError("actor: goal has " + std::to_string(goal_object.size()) + " dims, expected " +
                     std::to_string(model.dims().object));
  }
  if (model.params.size() == 0) throw UsageError("actor: model has no parameters");
}

sim::Action Actor::act(const Eigen::VectorXd& state) {
  if (state.size() != model_.state_dim()) throw InputError("actor: state dimension mismatch");
  const ModelConfig& cfg = model_.config();
  const Eigen::MatrixXd s = state;
  if (t_ % cfg.resample_interval == 0) {
    h_ = Mat<float>::Zero(cfg.policy_hidden, 1);
    if (has_latent(model_.variant())) {
      Tape<float> t;
      const auto p = model_.prior(t, t.constant(model_.prior_input(s, goal_).cast<float>()));
      Eigen::VectorXd eps(cfg.latent_dim);
      for (Eigen::Index k = 0; k < eps.size(); ++k) eps[k] = noise_.normal();
      const Eigen::VectorXd mu = p.mu.value().col(0).cast<double>();
      const Eigen::VectorXd sd = p.log_sigma.value().col(0).array().exp().cast<double>();
      z_ = cfg.prior_mean ? mu : Eigen::VectorXd(mu + sd.cwiseProduct(eps));
    }
    ++prior_samples_;
  }
  Tape<float> t;
  std::optional<Var<float>> z;
  if (has_latent(model_.variant())) z = t.constant(z_.cast<float>());
  const auto pv = model_.policy(t, s, goal_, z, 1, t.constant(h_));
  h_ = pv.hidden.value();
  const Eigen::Vector3d out = pv.out.value().col(0).cast<double>();
  ++t_;
  sim::Action a;
  a.target_position = sim::Vec2(state[0] + out[0], state[1] + out[1]);
  a.grab = out[2] > 0.5;
  return a;
}

}  // namespace plato::models
