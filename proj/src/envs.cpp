#include "inril/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

#include "inril/errors.hpp"
#include "inril/text_io.hpp"

namespace inril {

std::string to_string(EnvKind k) { return k == EnvKind::kGridworld ? "gridworld" : "pointmass"; }

EnvKind parse_env_kind(const std::string& s) {
    if (s == "gridworld") return EnvKind::kGridworld;
    if (s == "pointmass") return EnvKind::kPointmass;
    throw UsageError("unknown env '" + s + "' (valid: gridworld, pointmass)");
}

std::string to_string(GridAction a) {
    switch (a) {
        case GridAction::kUp: return "up";
        case GridAction::kDown: return "down";
        case GridAction::kLeft: return "left";
        case GridAction::kRight: return "right";
    }
    return "?";
}

std::array<double, 2> grid_action_vector(GridAction a) {
    switch (a) {
        case GridAction::kUp: return {-1.0, 0.0};
        case GridAction::kDown: return {1.0, 0.0};
        case GridAction::kLeft: return {0.0, -1.0};
        case GridAction::kRight: return {0.0, 1.0};
    }
    return {0.0, 0.0};
}

GridAction discretize_grid_action(std::span<const double> action) {
    if (action.size() != 2) throw ShapeError("gridworld action must have 2 components");
    const double scores[4] = {-action[0], action[0], -action[1], action[1]};
    int best = 0;
    for (int i = 1; i < 4; ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return static_cast<GridAction>(best);
}

// ---------------------------------------------------------------- Gridworld

Gridworld::Gridworld(GridworldConfig cfg) : cfg_(cfg) {
    if (cfg_.size < 2) throw ConfigError("gridworld size must be at least 2");
    if (cfg_.horizon < 1) throw ConfigError("gridworld horizon must be positive");
}

std::vector<double> Gridworld::encode(int row, int col, int size) {
    const double scale = 2.0 / static_cast<double>(size - 1);
    return {row * scale - 1.0, col * scale - 1.0};
}

std::vector<double> Gridworld::reset(std::uint64_t seed) {
    std::vector<std::pair<int, int>> starts;
    for (int r = 0; r < cfg_.size; ++r) {
        for (int c = 0; c < cfg_.size; ++c) {
            if (r + c <= cfg_.size - 2) starts.emplace_back(r, c);
        }
    }
    Rng rng(seed);
    const auto& [r, c] = starts[uniform_index(rng, starts.size())];
    set_state(r, c);
    return observation();
}

void Gridworld::set_state(int row, int col) {
    if (row < 0 || col < 0 || row >= cfg_.size || col >= cfg_.size) throw UsageError("gridworld state out of range");
    row_ = row;
    col_ = col;
    steps_ = 0;
    terminal_ = row == cfg_.size - 1 && col == cfg_.size - 1;
}

std::vector<double> Gridworld::observation() const { return encode(row_, col_, cfg_.size); }

Transition Gridworld::step(GridAction a) {
    const auto v = grid_action_vector(a);
    return step(std::span<const double>(v));
}

Transition Gridworld::step(std::span<const double> action) {
    if (terminal_) throw UsageError("gridworld: step called on a terminal environment");
    Transition t;
    t.obs = observation();
    t.action.assign(action.begin(), action.end());
    const GridAction a = discretize_grid_action(action);
    const auto v = grid_action_vector(a);
    row_ = std::clamp(row_ + static_cast<int>(v[0]), 0, cfg_.size - 1);
    col_ = std::clamp(col_ + static_cast<int>(v[1]), 0, cfg_.size - 1);
    ++steps_;
    t.success = row_ == cfg_.size - 1 && col_ == cfg_.size - 1;
    t.reward = t.success ? 1.0 : 0.0;
    terminal_ = t.success || steps_ >= cfg_.horizon;
    t.done = terminal_;
    t.next_obs = observation();
    return t;
}

// ---------------------------------------------------------------- PointMass

PointMass::PointMass(PointmassConfig cfg) : cfg_(cfg) {
    if (cfg_.horizon < 1) throw ConfigError("pointmass horizon must be positive");
    if (cfg_.sigma_env < 0.0) throw ConfigError("pointmass sigma_env must be nonnegative");
}

std::vector<double> PointMass::reset(std::uint64_t seed) {
    Rng rng(seed);
    const double w = cfg_.start_half_width;
    double x = 0.0;
    double y = 0.0;
    do {
        x = uniform(rng, -w, w);
        y = uniform(rng, -w, w);
    } while (std::hypot(x - cfg_.goal_x, y - cfg_.goal_y) < 2.0 * cfg_.goal_radius);
    set_position(x, y);
    noise_rng_ = Rng(mix64(seed));
    return observation();
}

void PointMass::set_position(double x, double y) {
    x_ = x;
    y_ = y;
    steps_ = 0;
    terminal_ = false;
}

double PointMass::distance_to_goal() const { return std::hypot(x_ - cfg_.goal_x, y_ - cfg_.goal_y); }

Transition PointMass::step(std::span<const double> action) {
    if (terminal_) throw UsageError("pointmass: step called on a terminal environment");
    if (action.size() != 2) throw ShapeError("pointmass action must have 2 components");
    Transition t;
    t.obs = observation();
    t.action.assign(action.begin(), action.end());
    const double ax = std::clamp(action[0], -1.0, 1.0);
    const double ay = std::clamp(action[1], -1.0, 1.0);
    t.reward = -distance_to_goal() - 0.01 * (ax * ax + ay * ay);
    x_ += 0.1 * ax;
    y_ += 0.1 * ay;
    if (cfg_.sigma_env > 0.0) {
        x_ += cfg_.sigma_env * standard_normal(noise_rng_);
        y_ += cfg_.sigma_env * standard_normal(noise_rng_);
    }
    ++steps_;
    t.success = distance_to_goal() < cfg_.goal_radius;
    terminal_ = t.success || steps_ >= cfg_.horizon;
    t.done = terminal_;
    t.next_obs = observation();
    return t;
}

// ---------------------------------------------------------------- Env

namespace {

std::variant<Gridworld, PointMass> make_env(const EnvConfig& cfg) {
    if (cfg.kind == EnvKind::kGridworld) return Gridworld(cfg.grid);
    return PointMass(cfg.point);
}

}  // namespace

Env::Env(const EnvConfig& cfg) : cfg_(cfg), env_(make_env(cfg)) {}

std::vector<double> Env::reset(std::uint64_t seed) {
    return std::visit([&](auto& e) { return e.reset(seed); }, env_);
}

Transition Env::step(std::span<const double> action) {
    if (action.size() != EnvConfig::act_dim()) throw ShapeError("env: action dimension mismatch");
    return std::visit([&](auto& e) { return e.step(action); }, env_);
}

bool Env::terminal() const {
    return std::visit([](const auto& e) { return e.terminal(); }, env_);
}

int Env::step_count() const {
    return std::visit([](const auto& e) { return e.step_count(); }, env_);
}

std::vector<double> Env::observation() const {
    return std::visit([](const auto& e) { return e.observation(); }, env_);
}

// ---------------------------------------------------------------- Experts

std::vector<double> gridworld_value_iteration(int size, double gamma, double tol) {
    const int n = size * size;
    const int goal = n - 1;
    std::vector<double> v(n, 0.0);
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};
    for (int iter = 0; iter < 100000; ++iter) {
        double change = 0.0;
        std::vector<double> next(n, 0.0);
        for (int s = 0; s < n; ++s) {
            if (s == goal) continue;
            const int r = s / size;
            const int c = s % size;
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < 4; ++a) {
                const int nr = std::clamp(r + dr[a], 0, size - 1);
                const int nc = std::clamp(c + dc[a], 0, size - 1);
                const int ns = nr * size + nc;
                const double q = ns == goal ? 1.0 : gamma * v[ns];
                best = std::max(best, q);
            }
            next[s] = best;
            change = std::max(change, std::abs(best - v[s]));
        }
        v.swap(next);
        if (change < tol) break;
    }
    return v;
}

namespace {

const std::vector<double>& cached_values(int size) {
    static std::mutex mu;
    static std::map<int, std::vector<double>> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(size);
    if (it == cache.end()) it = cache.emplace(size, gridworld_value_iteration(size, 0.99)).first;
    return it->second;
}

}  // namespace

GridAction gridworld_expert(int size, int row, int col) {
    const auto& v = cached_values(size);
    const int goal = size * size - 1;
    double best = -std::numeric_limits<double>::infinity();
    GridAction choice = GridAction::kUp;
    for (int a = 0; a < 4; ++a) {
        const auto d = grid_action_vector(static_cast<GridAction>(a));
        const int nr = std::clamp(row + static_cast<int>(d[0]), 0, size - 1);
        const int nc = std::clamp(col + static_cast<int>(d[1]), 0, size - 1);
        const int ns = nr * size + nc;
        const double q = ns == goal ? 1.0 : 0.99 * v[ns];
        // >= so that among optimal moves the later direction wins
        if (q >= best - 1e-12) {
            if (q > best + 1e-12) best = q;
            choice = static_cast<GridAction>(a);
        }
    }
    return choice;
}

std::vector<double> expert_action(const EnvConfig& cfg, std::span<const double> obs) {
    if (obs.size() != EnvConfig::obs_dim()) throw ShapeError("expert_action: observation dimension mismatch");
    if (cfg.kind == EnvKind::kGridworld) {
        const int size = cfg.grid.size;
        const int row = static_cast<int>(std::lround((obs[0] + 1.0) * (size - 1) / 2.0));
        const int col = static_cast<int>(std::lround((obs[1] + 1.0) * (size - 1) / 2.0));
        const auto v = grid_action_vector(gridworld_expert(size, row, col));
        return {v[0], v[1]};
    }
    const double kp = 2.0;
    return {std::clamp(kp * (cfg.point.goal_x - obs[0]), -1.0, 1.0),
            std::clamp(kp * (cfg.point.goal_y - obs[1]), -1.0, 1.0)};
}

// ---------------------------------------------------------------- Demos

void DemoDataset::validate() const {
    if (pairs.empty()) throw UsageError("demo dataset is empty");
    for (const auto& p : pairs) {
        if (p.obs.size() != obs_dim || p.action.size() != act_dim) {
            throw ShapeError("demo dataset has a dimension-inconsistent pair");
        }
    }
}

DemoDataset generate_demos(const EnvConfig& cfg, int n_trajectories, double action_noise_std, std::uint64_t seed) {
    if (n_trajectories < 1) throw UsageError("generate_demos: n_trajectories must be >= 1");
    if (action_noise_std < 0.0) throw UsageError("generate_demos: noise must be nonnegative");
    DemoDataset ds;
    ds.kind = cfg.kind;
    ds.seed = seed;
    ds.action_noise_std = action_noise_std;
    ds.n_trajectories = n_trajectories;
    ds.policy = cfg.kind == EnvKind::kGridworld ? "value_iteration_expert" : "proportional_expert_kp2";
    const long max_attempts = 100L * n_trajectories;
    Env env(cfg);
    int accepted = 0;
    for (long attempt = 0; accepted < n_trajectories; ++attempt) {
        if (attempt >= max_attempts) {
            throw EnvError("generate_demos: more than " + std::to_string(max_attempts) +
                           " attempts without enough successful demonstrations; check env/noise settings");
        }
        Rng rng = make_rng(seed, Stream::kDemo, static_cast<std::uint64_t>(attempt));
        std::vector<double> obs = env.reset(rng());
        std::vector<DemoPair> traj;
        bool success = false;
        while (!env.terminal()) {
            std::vector<double> a = expert_action(cfg, obs);
            if (action_noise_std > 0.0) {
                for (double& x : a) x += action_noise_std * standard_normal(rng);
            }
            traj.push_back({obs, a, accepted});
            Transition t = env.step(a);
            success = t.success;
            obs = t.next_obs;
        }
        if (!success) continue;
        ds.pairs.insert(ds.pairs.end(), traj.begin(), traj.end());
        ++accepted;
    }
    return ds;
}

double coverage_metric(const DemoDataset& demos, const std::vector<std::vector<double>>& reference_states) {
    if (demos.pairs.empty() || reference_states.empty()) throw UsageError("coverage_metric: empty input");
    double total = 0.0;
    for (const auto& ref : reference_states) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : demos.pairs) {
            if (p.obs.size() != ref.size()) throw ShapeError("coverage_metric: dimension mismatch");
            double d2 = 0.0;
            for (std::size_t i = 0; i < ref.size(); ++i) d2 += (ref[i] - p.obs[i]) * (ref[i] - p.obs[i]);
            best = std::min(best, d2);
        }
        total += std::sqrt(best);
    }
    return total / static_cast<double>(reference_states.size());
}

std::vector<std::vector<double>> expert_state_distribution(const EnvConfig& cfg, int n_episodes, std::uint64_t seed) {
    std::vector<std::vector<double>> states;
    Env env(cfg);
    for (int ep = 0; ep < n_episodes; ++ep) {
        std::vector<double> obs = env.reset(derive_seed(seed, Stream::kEval, static_cast<std::uint64_t>(ep)));
        while (!env.terminal()) {
            states.push_back(obs);
            obs = env.step(expert_action(cfg, obs)).next_obs;
        }
    }
    return states;
}

std::string serialize_demos(const DemoDataset& demos) {
    demos.validate();
    std::ostringstream out;
    out << "# inril-demos v1 env=" << to_string(demos.kind) << " seed=" << demos.seed
        << " noise=" << format_double(demos.action_noise_std) << " obs_dim=" << demos.obs_dim
        << " act_dim=" << demos.act_dim << " trajectories=" << demos.n_trajectories << " policy=" << demos.policy
        << "\n";
    for (const auto& p : demos.pairs) {
        out << p.trajectory;
        for (double v : p.obs) out << ' ' << format_double(v);
        for (double v : p.action) out << ' ' << format_double(v);
        out << '\n';
    }
    return out.str();
}

DemoDataset parse_demos(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# inril-demos v1", 0) != 0) {
        throw ParseError("demo file: missing '# inril-demos v1' header");
    }
    DemoDataset ds;
    std::map<std::string, std::string> fields;
    {
        std::istringstream hs(line.substr(16));
        std::string tok;
        while (hs >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) throw ParseError("demo header: malformed field '" + tok + "'");
            fields[tok.substr(0, eq)] = tok.substr(eq + 1);
        }
    }
    for (const char* key : {"env", "seed", "noise", "obs_dim", "act_dim", "trajectories"}) {
        if (!fields.count(key)) throw ParseError(std::string("demo header: missing field '") + key + "'");
    }
    try {
        ds.kind = parse_env_kind(fields["env"]);
    } catch (const UsageError& e) {
        throw ParseError(std::string("demo header: ") + e.what());
    }
    ds.seed = std::stoull(fields["seed"]);
    ds.action_noise_std = parse_double(fields["noise"], "demo header noise");
    ds.obs_dim = std::stoul(fields["obs_dim"]);
    ds.act_dim = std::stoul(fields["act_dim"]);
    ds.n_trajectories = std::stoi(fields["trajectories"]);
    if (fields.count("policy")) ds.policy = fields["policy"];
    const std::size_t expected = 1 + ds.obs_dim + ds.act_dim;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<std::string> toks;
        std::string tok;
        while (ls >> tok) toks.push_back(tok);
        if (toks.size() != expected) {
            throw ParseError("demo file line " + std::to_string(lineno) + ": expected " + std::to_string(expected) +
                             " fields, found " + std::to_string(toks.size()));
        }
        DemoPair p;
        const std::string ctx = "demo file line " + std::to_string(lineno);
        p.trajectory = static_cast<int>(parse_double(toks[0], ctx));
        for (std::size_t i = 0; i < ds.obs_dim; ++i) p.obs.push_back(parse_double(toks[1 + i], ctx));
        for (std::size_t i = 0; i < ds.act_dim; ++i) p.action.push_back(parse_double(toks[1 + ds.obs_dim + i], ctx));
        ds.pairs.push_back(std::move(p));
    }
    if (ds.pairs.empty()) throw ParseError("demo file has no records");
    return ds;
}

void save_demos(const DemoDataset& demos, const std::filesystem::path& path) {
    write_text_file(path, serialize_demos(demos));
}

DemoDataset load_demos(const std::filesystem::path& path) { return parse_demos(read_text_file(path)); }

}  // namespace inril
