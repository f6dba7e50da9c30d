#include "inril/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "inril/errors.hpp"
#include "inril/text_io.hpp"

namespace inril {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& section) {
    if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            std::string valid;
            for (const auto& k : allowed) valid += (valid.empty() ? "" : ", ") + k;
            throw ConfigError("unknown config key '" + (section.empty() ? "" : section + ".") + it.key() +
                              "' (valid: " + valid + ")");
        }
    }
}

template <class T>
T get_as(const json& j, const std::string& name) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + name + "' has the wrong type: " + j.dump());
    }
}

double get_number(const json& j, const std::string& name) {
    if (!j.is_number()) throw ConfigError("config key '" + name + "' must be a number, got " + j.dump());
    return j.get<double>();
}

std::int64_t get_int(const json& j, const std::string& name) {
    if (!j.is_number_integer()) throw ConfigError("config key '" + name + "' must be an integer, got " + j.dump());
    return j.get<std::int64_t>();
}

std::uint64_t get_uint(const json& j, const std::string& name) {
    const std::int64_t v = get_int(j, name);
    if (v < 0) throw ConfigError("config key '" + name + "' must be nonnegative");
    return static_cast<std::uint64_t>(v);
}

bool get_bool(const json& j, const std::string& name) {
    if (!j.is_boolean()) throw ConfigError("config key '" + name + "' must be true or false, got " + j.dump());
    return j.get<bool>();
}

std::vector<std::size_t> get_widths(const json& j, const std::string& name) {
    if (!j.is_array() || j.empty()) throw ConfigError("config key '" + name + "' must be a nonempty integer list");
    std::vector<std::size_t> out;
    for (const auto& v : j) {
        const std::int64_t w = get_int(v, name);
        if (w < 1) throw ConfigError("config key '" + name + "' must contain positive widths");
        out.push_back(static_cast<std::size_t>(w));
    }
    return out;
}

EnvKind get_env(const json& j) {
    if (!j.is_string()) throw ConfigError("config key 'env' must be a string");
    try {
        return parse_env_kind(j.get<std::string>());
    } catch (const UsageError& e) {
        throw ConfigError(e.what());
    }
}

json widths_json(const std::vector<std::size_t>& w) {
    json a = json::array();
    for (std::size_t v : w) a.push_back(v);
    return a;
}

}  // namespace

void SweepSpec::validate() const {
    if (m_values.empty()) throw ConfigError("sweep.m_values must be nonempty");
    if (seeds.empty()) throw ConfigError("sweep.seeds must be nonempty");
    if (modes.empty()) throw ConfigError("sweep.modes must be nonempty");
    for (const auto& m : m_values) {
        if (m && *m < 1) throw ConfigError("sweep.m_values entries must be >= 1 or \"infinity\"");
    }
}

void RunConfig::validate() const {
    interleave.validate();
    RlConfig r = rl;
    r.lr = interleave.alpha_rl;
    r.validate();
    if (budget_env_steps < 1) throw ConfigError("budget_env_steps must be positive");
    if (demo_trajectories < 1) throw ConfigError("demos.n_trajectories must be >= 1");
    if (demo_noise < 0.0) throw ConfigError("demos.action_noise_std must be nonnegative");
    if (pretrain_eval_every < 1) throw ConfigError("pretrain.eval_every must be >= 1");
    if (pretrain_eval_episodes < 1) throw ConfigError("pretrain.eval_episodes must be >= 1");
    if (!(il.lr > 0.0)) throw ConfigError("pretrain.lr must be positive");
    if (il.batch_size < 1) throw ConfigError("il.batch_size must be >= 1");
    if (env.grid.size < 2 || env.grid.horizon < 1) throw ConfigError("gridworld needs size >= 2 and horizon >= 1");
    if (env.point.horizon < 1 || !(env.point.goal_radius > 0.0) || env.point.sigma_env < 0.0 ||
        !(env.point.start_half_width > 0.0)) {
        throw ConfigError("invalid point-mass settings");
    }
    policy_spec(EnvConfig::obs_dim(), EnvConfig::act_dim(), policy_hidden, activation).validate();
    sweep.validate();
}

RunConfig resolve_config(const json& j) {
    check_keys(j,
               {"env", "seed", "mode", "m", "alpha_il", "alpha_rl", "bc_reg_weight", "budget_env_steps",
                "fresh_rl_grad_for_surgery", "residual_scale", "residual_hidden", "value_hidden", "adaptive_floor",
                "adaptive_max", "adaptive_initial_m", "ema_window", "eval_every_cycles", "eval_episodes",
                "env_config", "policy", "demos", "pretrain", "rl", "il", "sweep"},
               "");
    RunConfig c;
    if (j.contains("env")) c.env.kind = get_env(j["env"]);
    const bool grid = c.env.kind == EnvKind::kGridworld;
    c.rl = default_rl_config(c.env.kind);
    c.demo_trajectories = grid ? 20 : 50;
    c.sweep.m_values = {1, 3, 5, 10, 15, std::nullopt};
    c.sweep.seeds = {0, 1, 2};
    c.sweep.modes = {Mode::kFullNetSurgery};

    if (j.contains("seed")) c.seed = get_uint(j["seed"], "seed");
    InterleaveConfig& ic = c.interleave;
    if (j.contains("mode")) {
        if (!j["mode"].is_string()) throw ConfigError("config key 'mode' must be a string");
        ic.mode = parse_mode(j["mode"].get<std::string>());
    }
    if (j.contains("m")) {
        const json& m = j["m"];
        if (m.is_string() && m.get<std::string>() == "adaptive") {
            ic.adaptive = true;
        } else if (m.is_number_integer()) {
            ic.m = static_cast<int>(m.get<std::int64_t>());
            ic.adaptive = false;
        } else {
            throw ConfigError("config key 'm' must be a positive integer or \"adaptive\", got " + m.dump());
        }
    }
    if (j.contains("alpha_il")) ic.alpha_il = get_number(j["alpha_il"], "alpha_il");
    if (j.contains("alpha_rl")) ic.alpha_rl = get_number(j["alpha_rl"], "alpha_rl");
    if (j.contains("bc_reg_weight")) ic.bc_reg_weight = get_number(j["bc_reg_weight"], "bc_reg_weight");
    if (j.contains("budget_env_steps")) c.budget_env_steps = get_int(j["budget_env_steps"], "budget_env_steps");
    if (j.contains("fresh_rl_grad_for_surgery"))
        ic.fresh_rl_grad_for_surgery = get_bool(j["fresh_rl_grad_for_surgery"], "fresh_rl_grad_for_surgery");
    if (j.contains("residual_scale")) ic.residual_scale = get_number(j["residual_scale"], "residual_scale");
    if (j.contains("residual_hidden")) ic.residual_hidden = get_widths(j["residual_hidden"], "residual_hidden");
    if (j.contains("value_hidden")) ic.value_hidden = get_widths(j["value_hidden"], "value_hidden");
    if (j.contains("adaptive_floor")) ic.adaptive_floor = static_cast<int>(get_int(j["adaptive_floor"], "adaptive_floor"));
    if (j.contains("adaptive_max")) ic.adaptive_max = static_cast<int>(get_int(j["adaptive_max"], "adaptive_max"));
    if (j.contains("adaptive_initial_m"))
        ic.adaptive_initial_m = static_cast<int>(get_int(j["adaptive_initial_m"], "adaptive_initial_m"));
    if (j.contains("ema_window")) ic.ema_window = static_cast<int>(get_int(j["ema_window"], "ema_window"));
    if (j.contains("eval_every_cycles"))
        ic.eval_every_cycles = static_cast<int>(get_int(j["eval_every_cycles"], "eval_every_cycles"));
    if (j.contains("eval_episodes")) ic.eval_episodes = static_cast<int>(get_int(j["eval_episodes"], "eval_episodes"));

    if (j.contains("env_config")) {
        const json& e = j["env_config"];
        if (grid) {
            check_keys(e, {"size", "horizon"}, "env_config");
            if (e.contains("size")) c.env.grid.size = static_cast<int>(get_int(e["size"], "env_config.size"));
            if (e.contains("horizon")) c.env.grid.horizon = static_cast<int>(get_int(e["horizon"], "env_config.horizon"));
        } else {
            check_keys(e, {"goal", "sigma_env", "goal_radius", "start_half_width", "horizon"}, "env_config");
            if (e.contains("goal")) {
                const json& g = e["goal"];
                if (!g.is_array() || g.size() != 2) throw ConfigError("env_config.goal must be [x, y]");
                c.env.point.goal_x = get_number(g[0], "env_config.goal");
                c.env.point.goal_y = get_number(g[1], "env_config.goal");
            }
            if (e.contains("sigma_env")) c.env.point.sigma_env = get_number(e["sigma_env"], "env_config.sigma_env");
            if (e.contains("goal_radius")) c.env.point.goal_radius = get_number(e["goal_radius"], "env_config.goal_radius");
            if (e.contains("start_half_width"))
                c.env.point.start_half_width = get_number(e["start_half_width"], "env_config.start_half_width");
            if (e.contains("horizon")) c.env.point.horizon = static_cast<int>(get_int(e["horizon"], "env_config.horizon"));
        }
    }
    if (j.contains("policy")) {
        const json& p = j["policy"];
        check_keys(p, {"hidden", "activation", "init_log_std"}, "policy");
        if (p.contains("hidden")) c.policy_hidden = get_widths(p["hidden"], "policy.hidden");
        if (p.contains("activation")) {
            if (!p["activation"].is_string()) throw ConfigError("policy.activation must be a string");
            c.activation = parse_activation(p["activation"].get<std::string>());
        }
        if (p.contains("init_log_std")) c.init_log_std = get_number(p["init_log_std"], "policy.init_log_std");
    }
    if (j.contains("demos")) {
        const json& d = j["demos"];
        check_keys(d, {"n_trajectories", "action_noise_std"}, "demos");
        if (d.contains("n_trajectories"))
            c.demo_trajectories = static_cast<int>(get_int(d["n_trajectories"], "demos.n_trajectories"));
        if (d.contains("action_noise_std")) c.demo_noise = get_number(d["action_noise_std"], "demos.action_noise_std");
    }
    if (j.contains("pretrain")) {
        const json& p = j["pretrain"];
        check_keys(p, {"n_steps", "lr", "eval_every", "eval_episodes"}, "pretrain");
        if (p.contains("n_steps")) c.pretrain_steps = get_uint(p["n_steps"], "pretrain.n_steps");
        if (p.contains("lr")) c.il.lr = get_number(p["lr"], "pretrain.lr");
        if (p.contains("eval_every")) c.pretrain_eval_every = static_cast<int>(get_int(p["eval_every"], "pretrain.eval_every"));
        if (p.contains("eval_episodes"))
            c.pretrain_eval_episodes = static_cast<int>(get_int(p["eval_episodes"], "pretrain.eval_episodes"));
    }
    if (j.contains("il")) {
        const json& p = j["il"];
        check_keys(p, {"batch_size", "shuffle_seed"}, "il");
        if (p.contains("batch_size")) c.il.batch_size = static_cast<std::size_t>(get_uint(p["batch_size"], "il.batch_size"));
        if (p.contains("shuffle_seed")) c.il.shuffle_seed = get_uint(p["shuffle_seed"], "il.shuffle_seed");
    }
    if (j.contains("rl")) {
        const json& r = j["rl"];
        check_keys(r,
                   {"gamma", "gae_lambda", "clip_eps", "steps_per_batch", "value_lr", "value_epochs",
                    "normalize_advantages"},
                   "rl");
        if (r.contains("gamma")) c.rl.gamma = get_number(r["gamma"], "rl.gamma");
        if (r.contains("gae_lambda")) c.rl.gae_lambda = get_number(r["gae_lambda"], "rl.gae_lambda");
        if (r.contains("clip_eps")) c.rl.clip_eps = get_number(r["clip_eps"], "rl.clip_eps");
        if (r.contains("steps_per_batch"))
            c.rl.steps_per_batch = static_cast<std::size_t>(get_uint(r["steps_per_batch"], "rl.steps_per_batch"));
        if (r.contains("value_lr")) c.rl.value_lr = get_number(r["value_lr"], "rl.value_lr");
        if (r.contains("value_epochs")) c.rl.value_epochs = static_cast<int>(get_int(r["value_epochs"], "rl.value_epochs"));
        if (r.contains("normalize_advantages"))
            c.rl.normalize_advantages = get_bool(r["normalize_advantages"], "rl.normalize_advantages");
    }
    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        check_keys(s, {"m_values", "seeds", "modes"}, "sweep");
        if (s.contains("m_values")) {
            if (!s["m_values"].is_array()) throw ConfigError("sweep.m_values must be a list");
            c.sweep.m_values.clear();
            for (const auto& v : s["m_values"]) {
                if (v.is_string() && v.get<std::string>() == "infinity") {
                    c.sweep.m_values.push_back(std::nullopt);
                } else {
                    c.sweep.m_values.push_back(static_cast<int>(get_int(v, "sweep.m_values")));
                }
            }
        }
        if (s.contains("seeds")) {
            if (!s["seeds"].is_array()) throw ConfigError("sweep.seeds must be a list");
            c.sweep.seeds.clear();
            for (const auto& v : s["seeds"]) c.sweep.seeds.push_back(get_uint(v, "sweep.seeds"));
        }
        if (s.contains("modes")) {
            if (!s["modes"].is_array()) throw ConfigError("sweep.modes must be a list");
            c.sweep.modes.clear();
            for (const auto& v : s["modes"]) c.sweep.modes.push_back(parse_mode(get_as<std::string>(v, "sweep.modes")));
        }
    }
    c.rl.lr = ic.alpha_rl;
    c.validate();
    return c;
}

json to_json(const RunConfig& c) {
    const InterleaveConfig& ic = c.interleave;
    json j;
    j["env"] = to_string(c.env.kind);
    j["seed"] = c.seed;
    j["mode"] = to_string(ic.mode);
    if (ic.adaptive) {
        j["m"] = "adaptive";
    } else {
        j["m"] = ic.m;
    }
    j["alpha_il"] = ic.alpha_il;
    j["alpha_rl"] = ic.alpha_rl;
    j["bc_reg_weight"] = ic.bc_reg_weight;
    j["budget_env_steps"] = c.budget_env_steps;
    j["fresh_rl_grad_for_surgery"] = ic.fresh_rl_grad_for_surgery;
    j["residual_scale"] = ic.residual_scale;
    j["residual_hidden"] = widths_json(ic.residual_hidden);
    j["value_hidden"] = widths_json(ic.value_hidden);
    j["adaptive_floor"] = ic.adaptive_floor;
    j["adaptive_max"] = ic.adaptive_max;
    j["adaptive_initial_m"] = ic.adaptive_initial_m;
    j["ema_window"] = ic.ema_window;
    j["eval_every_cycles"] = ic.eval_every_cycles;
    j["eval_episodes"] = ic.eval_episodes;
    if (c.env.kind == EnvKind::kGridworld) {
        j["env_config"] = {{"size", c.env.grid.size}, {"horizon", c.env.grid.horizon}};
    } else {
        const PointmassConfig& p = c.env.point;
        j["env_config"] = {{"goal", {p.goal_x, p.goal_y}},
                           {"sigma_env", p.sigma_env},
                           {"goal_radius", p.goal_radius},
                           {"start_half_width", p.start_half_width},
                           {"horizon", p.horizon}};
    }
    j["policy"] = {{"hidden", widths_json(c.policy_hidden)},
                   {"activation", to_string(c.activation)},
                   {"init_log_std", c.init_log_std}};
    j["demos"] = {{"n_trajectories", c.demo_trajectories}, {"action_noise_std", c.demo_noise}};
    j["pretrain"] = {{"n_steps", c.pretrain_steps},
                     {"lr", c.il.lr},
                     {"eval_every", c.pretrain_eval_every},
                     {"eval_episodes", c.pretrain_eval_episodes}};
    j["il"] = {{"batch_size", c.il.batch_size}, {"shuffle_seed", c.il.shuffle_seed}};
    j["rl"] = {{"gamma", c.rl.gamma},
               {"gae_lambda", c.rl.gae_lambda},
               {"clip_eps", c.rl.clip_eps},
               {"steps_per_batch", c.rl.steps_per_batch},
               {"value_lr", c.rl.value_lr},
               {"value_epochs", c.rl.value_epochs},
               {"normalize_advantages", c.rl.normalize_advantages}};
    json ms = json::array();
    for (const auto& m : c.sweep.m_values) {
        if (m) {
            ms.push_back(*m);
        } else {
            ms.push_back("infinity");
        }
    }
    json modes = json::array();
    for (Mode m : c.sweep.modes) modes.push_back(to_string(m));
    j["sweep"] = {{"m_values", ms}, {"seeds", c.sweep.seeds}, {"modes", modes}};
    return j;
}

json load_config_json(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("config " + path.string() + " is not valid JSON: " + e.what());
    }
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("override '" + assignment + "' must look like key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &j;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ConfigError("override path '" + path + "' crosses a non-object value");
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = json::object();
    }
    if (!node->is_object() && !node->is_null()) throw ConfigError("override path '" + path + "' crosses a non-object value");
    (*node)[parts.back()] = value;
}

}  // namespace inril
