#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "inril/mlp.hpp"

namespace inril {

/// Named networks plus run metadata.
///
/// On-disk layout (text, one item per line):
///
///     inril-checkpoint <layout_version>
///     <header JSON: {"seed", "step", "meta", "networks": [{"name", "layer_widths",
///                    "activation", "head", "num_params"}, ...]}>
///     <num_params values of network 0, one per line, %.17g>
///     <num_params values of network 1, ...>
///
/// Seventeen significant digits round-trip every IEEE double, so save/load is
/// bit-exact.
struct Checkpoint {
    static constexpr int kLayoutVersion = 1;

    std::uint64_t seed = 0;
    std::uint64_t step = 0;         // optimizer steps taken so far (pretrain resume)
    std::string meta;               // free-form JSON object text, "{}" when empty
    std::vector<std::pair<std::string, Mlp>> networks;

    const Mlp* find(const std::string& name) const;
    const Mlp& get(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);

}  // namespace inril
