#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "inril/envs.hpp"
#include "inril/il.hpp"
#include "inril/interleave.hpp"
#include "inril/mlp.hpp"
#include "inril/rl.hpp"

namespace inril {

inline constexpr const char* kCodeVersion = "0.1.0";

/// Grid of finetune runs. A missing m means m = infinity, i.e. rl_only.
struct SweepSpec {
    std::vector<std::optional<int>> m_values;
    std::vector<std::uint64_t> seeds;
    std::vector<Mode> modes;

    void validate() const;
};

/// Fully resolved configuration shared by every command.
///
/// Top-level keys: env, seed, mode, m (integer or "adaptive"), alpha_il,
/// alpha_rl, bc_reg_weight, budget_env_steps, fresh_rl_grad_for_surgery,
/// residual_scale, residual_hidden, value_hidden, adaptive_floor,
/// adaptive_max, adaptive_initial_m, ema_window, eval_every_cycles,
/// eval_episodes. Sections: env_config, policy, demos, pretrain, rl, il,
/// sweep. Any other key is a ConfigError.
struct RunConfig {
    EnvConfig env;
    std::uint64_t seed = 0;

    std::vector<std::size_t> policy_hidden{64, 64};
    Activation activation = Activation::kTanh;
    double init_log_std = 0.0;

    int demo_trajectories = 20;
    double demo_noise = 0.0;

    std::uint64_t pretrain_steps = 2000;
    int pretrain_eval_every = 200;
    int pretrain_eval_episodes = 100;

    IlBatchConfig il;  // il.lr is the pretraining rate
    RlConfig rl;       // rl.lr is ignored in favor of interleave.alpha_rl
    InterleaveConfig interleave;
    std::int64_t budget_env_steps = 102400;

    SweepSpec sweep;

    void validate() const;
};

/// Builds a RunConfig from a JSON object, applying per-env defaults for keys
/// that are absent. Unknown keys and ill-typed values raise ConfigError.
RunConfig resolve_config(const nlohmann::json& j);

/// Complete JSON form of a resolved config; resolve_config(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& c);

/// Reads a config file (FileError if missing, ParseError if not JSON).
nlohmann::json load_config_json(const std::filesystem::path& path);

/// Applies "a.b.c=value" to `j`; the value is parsed as JSON when possible and
/// kept as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace inril
