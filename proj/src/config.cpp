#include "rlpp/config.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "rlpp/io.hpp"

namespace rlpp {

namespace {

using nlohmann::json;

// One binding function per section drives both reading and writing, so the
// two directions cannot drift apart.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key '" + path_ + "." + k + "'");
    }
  }

  template <typename T>
  void operator()(const char* key, T& value) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      value = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + path_ + "." + key + "': " + e.what());
    }
  }

  template <typename F>
  void section(const char* key, F&& bind) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    Reader sub(*it, path_ + "." + key);
    bind(sub);
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const { return j_.at(key); }
  void mark(const char* key) { seen_.insert(key); }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(json& j) : j_(j) { j_ = json::object(); }

  template <typename T>
  void operator()(const char* key, T& value) {
    j_[key] = value;
  }

  template <typename F>
  void section(const char* key, F&& bind) {
    Writer sub(j_[key]);
    bind(sub);
  }

 private:
  json& j_;
};

template <typename V>
void bind_speed(V& v, SpeedProfile& s) {
  v("v_cap", s.v_cap);
  v("a_lat_max", s.a_lat_max);
  v("a_long_max", s.a_long_max);
}

template <typename V>
void bind_track(V& v, TrackSource& t) {
  v("file", t.file);
  std::string kind = t.synth.kind == TrackKind::kOval ? "oval" : "rounded_rectangle";
  v("kind", kind);
  t.synth.kind = parse_track_kind(kind);
  v("length", t.synth.length);
  v("width", t.synth.width);
  v("radius", t.synth.radius);
  v("spacing", t.synth.spacing);
  v("half_width", t.synth.half_width);
  v.section("speed", [&](auto& s) { bind_speed(s, t.synth.speed); });
}

template <typename V>
void bind_sim(V& v, SimConfig& s) {
  v("wheelbase", s.wheelbase);
  v("dt_physics", s.dt_physics);
  v("dt_control", s.dt_control);
  v("delta_max", s.delta_max);
  v("delta_rate_max", s.delta_rate_max);
  v("a_max", s.a_max);
  v("speed_gain", s.speed_gain);
}

template <typename V>
void bind_reward(V& v, RewardWeights& w) {
  v("w_v", w.w_v);
  v("w_lookahead", w.w_lookahead);
  v("w_gain", w.w_gain);
  v("w_jerk_lookahead", w.w_jerk_lookahead);
  v("w_jerk_gain", w.w_jerk_gain);
  v("w_curvature", w.w_curvature);
  v("w_cross", w.w_cross);
  v("w_preshorten", w.w_preshorten);
  v("w_collision", w.w_collision);
  v("w_slow", w.w_slow);
  v("w_progress", w.w_progress);
  v("clip_low", w.clip_low);
  v("clip_high", w.clip_high);
  v("kappa_bend", w.kappa_bend);
  v("v_slow", w.v_slow);
}

template <typename V>
void bind_env(V& v, EnvConfig& e) {
  v("laps", e.laps);
  v("max_steps", e.max_steps);
  v("jitter", e.jitter);
  v("lateral_jitter", e.lateral_jitter);
  v("heading_jitter", e.heading_jitter);
  v("spawn_speed_fraction", e.spawn_speed_fraction);
  v("smoother_lookahead", e.smoother.lookahead);
  v("smoother_gain", e.smoother.gain);
  v("beta_lookahead", e.smoother.beta_lookahead);
  v("beta_gain", e.smoother.beta_gain);
}

template <typename V>
void bind_ppo(V& v, PPOConfig& p) {
  v("n_steps", p.n_steps);
  v("n_envs", p.n_envs);
  v("minibatch", p.minibatch);
  v("epochs", p.epochs);
  v("gamma", p.gamma);
  v("gae_lambda", p.gae_lambda);
  v("clip_range", p.clip_range);
  v("target_kl", p.target_kl);
  v("entropy_coef", p.entropy_coef);
  v("value_coef", p.value_coef);
  v("max_grad_norm", p.max_grad_norm);
  v("learning_rate", p.learning_rate);
  std::string sched(lr_schedule_name(p.schedule));
  v("lr_schedule", sched);
  p.schedule = parse_lr_schedule(sched);
  v("adam_beta1", p.adam_beta1);
  v("adam_beta2", p.adam_beta2);
  v("adam_eps", p.adam_eps);
  v("advantage_eps", p.advantage_eps);
  v("hidden", p.hidden);
  v("initial_log_std", p.initial_log_std);
}

template <typename V>
void bind_train(V& v, TrainConfig& t) {
  v("total_steps", t.total_steps);
  v("eval_every", t.eval_every);
  v("checkpoint_every", t.checkpoint_every);
  v("eval_episodes", t.eval_episodes);
  v("eval_at_start", t.eval_at_start);
  std::string mode = t.mode == ActionMode::kJoint ? "joint" : "ld-only";
  v("mode", mode);
  if (mode == "joint") {
    t.mode = ActionMode::kJoint;
  } else if (mode == "ld-only") {
    t.mode = ActionMode::kLookaheadOnly;
  } else {
    throw ConfigError("train.mode must be 'joint' or 'ld-only'");
  }
}

template <typename V>
void bind_solver(V& v, AdmmSettings& s) {
  v("rho", s.rho);
  v("sigma", s.sigma);
  v("alpha", s.alpha);
  v("eps_primal", s.eps_primal);
  v("eps_dual", s.eps_dual);
  v("max_iter", s.max_iter);
  v("adaptive_rho", s.adaptive_rho);
  v("adapt_interval", s.adapt_interval);
  v("adapt_ratio", s.adapt_ratio);
  v("eq_rho_scale", s.eq_rho_scale);
}

template <typename V>
void bind_mpc(V& v, MPCConfig& m) {
  v("horizon", m.horizon);
  v("dt", m.dt);
  v("q", m.q);
  v("q_terminal", m.q_terminal);
  v("r", m.r);
  v("r_delta", m.r_delta);
  v("delta_max", m.delta_max);
  v("a_max", m.a_max);
  v("delta_rate_max", m.delta_rate_max);
  v("v_floor", m.v_floor);
  v.section("solver", [&](auto& s) { bind_solver(s, m.solver); });
}

template <typename V>
void bind_eval(V& v, EvalConfig& e) {
  v("laps", e.laps);
  v("max_lap_time", e.max_lap_time);
  v("start_index", e.start_index);
  v("spawn_speed_fraction", e.spawn_speed_fraction);
  v("record_trace", e.record_trace);
}

void controller_from_json(const json& j, ControllerSpec& c) {
  Reader r(j, "controllers[]");
  std::string kind = controller_kind_name(c.kind);
  r("kind", kind);
  try {
    c.kind = parse_controller_kind(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  r("label", c.label);
  r("lookahead", c.lookahead);
  r("checkpoint", c.checkpoint);
  r("multiplier", c.multiplier);
  r("timeout", c.timeout);
  for (const char* key : {"gain", "v_lo", "v_hi"}) {
    r.mark(key);
    if (!r.has(key)) continue;
    const double value = r.at(key).get<double>();
    if (std::string(key) == "gain") c.gain = value;
    if (std::string(key) == "v_lo") c.v_lo = value;
    if (std::string(key) == "v_hi") c.v_hi = value;
  }
}

json controller_to_json(const ControllerSpec& c) {
  json j{{"kind", controller_kind_name(c.kind)}, {"label", c.label},     {"lookahead", c.lookahead},
         {"checkpoint", c.checkpoint},           {"multiplier", c.multiplier}, {"timeout", c.timeout}};
  if (c.gain) j["gain"] = *c.gain;
  if (c.v_lo) j["v_lo"] = *c.v_lo;
  if (c.v_hi) j["v_hi"] = *c.v_hi;
  return j;
}

template <typename V>
void bind_run(V& v, RunConfig& c) {
  v.section("track", [&](auto& s) { bind_track(s, c.track); });
  v.section("eval_track", [&](auto& s) { bind_track(s, c.eval_track); });
  v.section("sim", [&](auto& s) { bind_sim(s, c.sim); });
  v.section("reward", [&](auto& s) { bind_reward(s, c.reward); });
  v.section("env", [&](auto& s) { bind_env(s, c.env); });
  v.section("ppo", [&](auto& s) { bind_ppo(s, c.ppo); });
  v.section("train", [&](auto& s) { bind_train(s, c.train); });
  v.section("mpc", [&](auto& s) { bind_mpc(s, c.mpc); });
  v.section("eval", [&](auto& s) { bind_eval(s, c.eval); });
  v("multiplier", c.multiplier);
  v("train_multiplier", c.train_multiplier);
  v("sweep_grid", c.sweep_grid);
  v("sweep_refine", c.sweep_refine);
  v("fixed_gain", c.fixed_gain);
  v("gain_grid", c.gain_grid);
  v("seed", c.seed);
  v("out_dir", c.out_dir);
}

}  // namespace

Raceline TrackSource::build() const {
  if (!file.empty()) return load_raceline_file(file, synth.half_width);
  return synthesize_track(synth);
}

EnvConfig RunConfig::env_config() const {
  EnvConfig e = env;
  e.sim = sim;
  e.weights = reward;
  e.mode = train.mode;
  e.fixed_gain = fixed_gain;
  return e;
}

EnvFactory RunConfig::env_factory() const {
  auto raceline = std::make_shared<const Raceline>(track.build().scale_speeds(train_multiplier));
  const EnvConfig e = env_config();
  return [raceline, e](int) { return std::make_unique<RacingEnv>(raceline, e); };
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.ppo = ppo;
  t.seed = seed;
  t.fixed_gain = fixed_gain;
  t.out_dir = out_dir;
  return t;
}

HarnessContext RunConfig::harness_context() const { return {sim, mpc, fixed_gain}; }

EvalConfig RunConfig::eval_config() const {
  EvalConfig e = eval;
  e.sim = sim;
  return e;
}

void RunConfig::validate() const {
  try {
    sim.validate();
    ppo.validate();
    mpc.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(multiplier > 0.0)) throw ConfigError("multiplier must be > 0");
  if (!(train_multiplier > 0.0)) throw ConfigError("train_multiplier must be > 0");
  if (eval.laps < 1) throw ConfigError("eval.laps must be >= 1");
  if (!(eval.max_lap_time > 0.0)) throw ConfigError("eval.max_lap_time must be > 0");
  if (sweep_grid.empty()) throw ConfigError("sweep_grid must not be empty");
  for (std::size_t i = 0; i < sweep_grid.size(); ++i) {
    if (!(sweep_grid[i] > 0.0)) throw ConfigError("sweep_grid entries must be > 0");
    if (i && sweep_grid[i] <= sweep_grid[i - 1]) throw ConfigError("sweep_grid must be strictly ascending");
  }
  if (sweep_refine < 0.0) throw ConfigError("sweep_refine must be >= 0");
  if (train.total_steps < 1) throw ConfigError("train.total_steps must be >= 1");
  if (train.eval_every < 1 || train.checkpoint_every < 1) throw ConfigError("train cadences must be >= 1");
  if (env.laps < 1 || env.max_steps < 1) throw ConfigError("env.laps and env.max_steps must be >= 1");
  if (!(fixed_gain >= kGainMin && fixed_gain <= kGainMax)) throw ConfigError("fixed_gain outside gain bounds");
  for (const auto& c : controllers) {
    if (!(c.multiplier > 0.0)) throw ConfigError("controller multiplier must be > 0");
  }
}

RunConfig parse_config(const std::string& json_text, RunConfig base) {
  json j;
  try {
    j = json::parse(json_text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    Reader r(j, "config");
    bind_run(r, base);
    r.mark("controllers");
    if (r.has("controllers")) {
      const json& list = r.at("controllers");
      if (!list.is_array()) throw ConfigError("'controllers' must be an array");
      base.controllers.clear();
      for (const auto& item : list) {
        ControllerSpec c;
        controller_from_json(item, c);
        base.controllers.push_back(std::move(c));
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  base.validate();
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, std::move(base));
}

std::string config_to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  json j;
  Writer w(j);
  bind_run(w, copy);
  j["controllers"] = json::array();
  for (const auto& c : cfg.controllers) j["controllers"].push_back(controller_to_json(c));
  return j.dump(2) + "\n";
}

}  // namespace rlpp
