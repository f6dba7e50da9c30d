#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "inril/random.hpp"

namespace inril {

enum class EnvKind { kGridworld, kPointmass };

std::string to_string(EnvKind k);
/// Throws UsageError listing the valid names.
EnvKind parse_env_kind(const std::string& s);

/// Square grid, goal in the bottom-right corner. Episodes start in the
/// upper-left triangle (row + col <= size - 2) so every start is at least
/// `size` steps from the goal.
struct GridworldConfig {
    int size = 5;
    int horizon = 50;
};

/// Planar point mass. Reward is charged on the pre-step distance:
/// r = -|pos - goal| - 0.01 |a|^2, then pos <- pos + 0.1 a + sigma_env * noise.
struct PointmassConfig {
    double goal_x = 0.0;
    double goal_y = 0.0;
    double sigma_env = 0.0;
    double goal_radius = 0.05;
    double start_half_width = 1.0;  // starts uniform in [-w, w]^2
    int horizon = 100;
};

struct EnvConfig {
    EnvKind kind = EnvKind::kGridworld;
    GridworldConfig grid;
    PointmassConfig point;

    static constexpr std::size_t obs_dim() { return 2; }
    static constexpr std::size_t act_dim() { return 2; }
    int horizon() const { return kind == EnvKind::kGridworld ? grid.horizon : point.horizon; }
};

struct Transition {
    std::vector<double> obs;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_obs;
    bool done = false;      // goal reached or horizon hit
    bool success = false;   // goal reached on this step
    double logp_behavior = 0.0;
};

enum class GridAction { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

std::string to_string(GridAction a);
/// Continuous action for a grid move: up (-1,0), down (1,0), left (0,-1), right (0,1).
std::array<double, 2> grid_action_vector(GridAction a);
/// Argmax over {up: -a0, down: a0, left: -a1, right: a1}; ties go to the
/// earlier direction in up, down, left, right.
GridAction discretize_grid_action(std::span<const double> action);

class Gridworld {
public:
    explicit Gridworld(GridworldConfig cfg = {});

    std::vector<double> reset(std::uint64_t seed);
    /// Places the agent at (row, col) with a fresh step counter.
    void set_state(int row, int col);

    Transition step(GridAction a);
    Transition step(std::span<const double> action);

    std::vector<double> observation() const;
    int row() const { return row_; }
    int col() const { return col_; }
    int step_count() const { return steps_; }
    bool terminal() const { return terminal_; }
    const GridworldConfig& config() const { return cfg_; }

    /// Normalized observation in [-1, 1]^2 for a cell.
    static std::vector<double> encode(int row, int col, int size);

private:
    GridworldConfig cfg_;
    int row_ = 0;
    int col_ = 0;
    int steps_ = 0;
    bool terminal_ = false;
};

class PointMass {
public:
    explicit PointMass(PointmassConfig cfg = {});

    std::vector<double> reset(std::uint64_t seed);
    void set_position(double x, double y);

    Transition step(std::span<const double> action);

    std::vector<double> observation() const { return {x_, y_}; }
    double distance_to_goal() const;
    int step_count() const { return steps_; }
    bool terminal() const { return terminal_; }
    const PointmassConfig& config() const { return cfg_; }

private:
    PointmassConfig cfg_;
    double x_ = 0.0;
    double y_ = 0.0;
    int steps_ = 0;
    bool terminal_ = false;
    Rng noise_rng_{0};
};

/// Either environment behind one interface.
class Env {
public:
    explicit Env(const EnvConfig& cfg);

    std::vector<double> reset(std::uint64_t seed);
    Transition step(std::span<const double> action);
    bool terminal() const;
    int step_count() const;
    std::vector<double> observation() const;
    const EnvConfig& config() const { return cfg_; }

private:
    EnvConfig cfg_;
    std::variant<Gridworld, PointMass> env_;
};

/// Optimal state values by value iteration (reward 1 on entering the goal).
/// Indexed [row * size + col]; the goal cell holds 0.
std::vector<double> gridworld_value_iteration(int size, double gamma, double tol = 1e-13);

/// Analytic expert. Gridworld: an optimal action under value iteration, ties
/// going to the later direction in up < down < left < right. Point mass:
/// clip(2 (goal - pos), -1, 1).
std::vector<double> expert_action(const EnvConfig& cfg, std::span<const double> obs);
GridAction gridworld_expert(int size, int row, int col);

struct DemoPair {
    std::vector<double> obs;
    std::vector<double> action;
    int trajectory = 0;
};

struct DemoDataset {
    EnvKind kind = EnvKind::kGridworld;
    std::size_t obs_dim = 2;
    std::size_t act_dim = 2;
    std::uint64_t seed = 0;
    double action_noise_std = 0.0;
    int n_trajectories = 0;
    std::string policy = "expert";
    std::vector<DemoPair> pairs;

    std::size_t size() const { return pairs.size(); }
    /// Throws ShapeError/UsageError if empty or dimension-inconsistent.
    void validate() const;
};

/// Rolls the expert with additive Gaussian action noise; failed episodes are
/// discarded and resampled. More than 100x `n_trajectories` attempts raises EnvError.
DemoDataset generate_demos(const EnvConfig& cfg, int n_trajectories, double action_noise_std, std::uint64_t seed);

/// Mean over reference states of the distance to the nearest demo state.
double coverage_metric(const DemoDataset& demos, const std::vector<std::vector<double>>& reference_states);

/// States visited by the noiseless expert from `n_episodes` seeded starts.
std::vector<std::vector<double>> expert_state_distribution(const EnvConfig& cfg, int n_episodes, std::uint64_t seed);

/// Demo file: one header line
///   # inril-demos v1 env=<kind> seed=<u64> noise=<real> obs_dim=<n> act_dim=<k> trajectories=<n> policy=<name>
/// then one record per line: "<trajectory> <obs_0..obs_{n-1}> <act_0..act_{k-1}>",
/// whitespace separated, numbers printed with %.17g.
std::string serialize_demos(const DemoDataset& demos);
DemoDataset parse_demos(const std::string& text);
void save_demos(const DemoDataset& demos, const std::filesystem::path& path);
DemoDataset load_demos(const std::filesystem::path& path);

}  // namespace inril
