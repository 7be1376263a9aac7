#include "plato/cli/run_config.hpp"

#include <fstream>
#include <sstream>

#include "plato/common/error.hpp"
#include "plato/common/hash.hpp"
#include "plato/common/json_fields.hpp"

namespace plato::cli {

using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

json merged(json base, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) base[it.key()] = it.value();
  return base;
}

}  // namespace

models::ModelConfig RunConfig::model_for(models::Variant v) const {
  models::ModelConfig c = models::ModelConfig::defaults_for(v);
  if (!model_overrides.empty()) from_json(merged(json(c), model_overrides), c);
  return c;
}

eval::SuccessMetric RunConfig::metric() const {
  eval::SuccessMetric m = eval::SuccessMetric::for_config(collect.world, model().H_int);
  StrictObject o(eval.metric_overrides, "eval.metric");
  o.get("eps_pos", m.eps_pos);
  double deg = m.eps_rot * 180.0 / kPi;
  if (o.get("eps_rot_deg", deg)) m.eps_rot = deg * kPi / 180.0;
  o.get("min_progress", m.min_progress);
  o.get("max_steps", m.max_steps);
  o.finish();
  m.validate();
  return m;
}

eval::EvaluateOptions RunConfig::eval_options(int jobs) const {
  eval::EvaluateOptions o;
  o.primitives = eval.primitives;
  o.n_episodes = eval.episodes;
  o.eval_seed = seeds.eval;
  o.metric = metric();
  o.jobs = jobs;
  return o;
}

std::string RunConfig::hash() const { return hex64(fnv1a64(json(*this).dump())); }

void to_json(json& j, const RunConfig& c) {
  json g = c.collect;
  json prims = json::array();
  for (auto k : c.eval.primitives) prims.push_back(std::string(primitives::to_string(k)));
  j = json{{"world", g["world"]},
           {"ranges", g["ranges"]},
           {"weights", g["weights"]},
           {"max_episode_steps", c.collect.max_episode_steps},
           {"episodes", c.episodes},
           {"smoothing", c.smoothing},
           {"variant", std::string(models::to_string(c.variant))},
           {"model", c.model_overrides},
           {"seeds", {{"collect", c.seeds.collect}, {"train", c.seeds.train}, {"eval", c.seeds.eval}}},
           {"eval", {{"episodes", c.eval.episodes}, {"primitives", prims}, {"metric", c.eval.metric_overrides}}},
           {"paths", {{"data", c.paths.data}, {"checkpoint", c.paths.checkpoint}, {"output", c.paths.output}}}};
}

void from_json(const json& j, RunConfig& c) {
  StrictObject o(j, "config");
  json gen = json::object();
  for (const char* k : {"world", "ranges", "weights", "max_episode_steps"}) {
    if (const json* v = o.sub(k)) gen[k] = *v;
  }
  from_json(gen, c.collect);
  c.collect.world.validate();
  o.get("episodes", c.episodes);
  if (c.episodes < 1) throw ConfigError("config.episodes must be >= 1");
  if (const json* s = o.sub("smoothing")) from_json(*s, c.smoothing);
  std::string variant;
  if (o.get("variant", variant)) c.variant = models::variant_from_string(variant);
  if (const json* m = o.sub("model")) {
    if (!m->is_object()) throw ConfigError("config.model: expected a JSON object");
    c.model_overrides = *m;
  }
  if (const json* s = o.sub("seeds")) {
    StrictObject so(*s, "config.seeds");
    so.get("collect", c.seeds.collect);
    so.get("train", c.seeds.train);
    so.get("eval", c.seeds.eval);
    so.finish();
  }
  if (const json* e = o.sub("eval")) {
    StrictObject eo(*e, "config.eval");
    eo.get("episodes", c.eval.episodes);
    if (c.eval.episodes < 1) throw ConfigError("config.eval.episodes must be >= 1");
    std::vector<std::string> names;
    if (eo.get("primitives", names)) {
      if (names.empty()) throw ConfigError("config.eval.primitives must not be empty");
      c.eval.primitives.clear();
      for (const auto& n : names) c.eval.primitives.push_back(primitives::kind_from_string(n));
    }
    if (const json* m = eo.sub("metric")) {
      if (!m->is_object()) throw ConfigError("config.eval.metric: expected a JSON object");
      c.eval.metric_overrides = *m;
    }
    eo.finish();
  }
  if (const json* p = o.sub("paths")) {
    StrictObject po(*p, "config.paths");
    po.get("data", c.paths.data);
    po.get("checkpoint", c.paths.checkpoint);
    po.get("output", c.paths.output);
    po.finish();
  }
  o.finish();
  // Surface bad model or metric fields now rather than at first use.
  c.model();
  c.metric();
}

void apply_override(json& doc, const std::string& dot_path, const std::string& value) {
  if (dot_path.empty()) throw ConfigError("empty override key");
  json* node = &doc;
  std::size_t from = 0;
  while (true) {
    const std::size_t dot = dot_path.find('.', from);
    const std::string key = dot_path.substr(from, dot == std::string::npos ? std::string::npos : dot - from);
    if (key.empty()) throw ConfigError("malformed override key '" + dot_path + "'");
    if (!node->is_object()) throw ConfigError("override '" + dot_path + "' descends into a non-object");
    if (dot == std::string::npos) {
      json v = json::parse(value, nullptr, false);
      (*node)[key] = v.is_discarded() ? json(value) : v;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    from = dot + 1;
  }
}

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw ConfigError("unexpected argument '" + a + "'");
    std::string key = a.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= args.size()) throw ConfigError("override --" + key + " has no value");
      value = args[++i];
    }
    out.emplace_back(key, value);
  }
  return out;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    doc = json::parse(ss.str(), nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path + ": not valid JSON");
  }
  for (const auto& [k, v] : overrides) apply_override(doc, k, v);
  RunConfig c;
  from_json(doc, c);
  return c;
}

}  // namespace plato::cli
