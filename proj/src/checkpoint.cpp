#include "inril/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "inril/errors.hpp"
#include "inril/text_io.hpp"

namespace inril {

using nlohmann::json;

const Mlp* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, net] : networks) {
        if (n == name) return &net;
    }
    return nullptr;
}

const Mlp& Checkpoint::get(const std::string& name) const {
    const Mlp* net = find(name);
    if (net == nullptr) throw ParseError("checkpoint has no network named '" + name + "'");
    return *net;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    json header;
    header["seed"] = ckpt.seed;
    header["step"] = ckpt.step;
    header["meta"] = ckpt.meta.empty() ? json::object() : json::parse(ckpt.meta);
    header["networks"] = json::array();
    for (const auto& [name, net] : ckpt.networks) {
        header["networks"].push_back({{"name", name},
                                      {"layer_widths", net.spec().layer_widths},
                                      {"activation", to_string(net.spec().activation)},
                                      {"head", to_string(net.spec().head)},
                                      {"num_params", net.num_params()}});
    }
    std::string out = "inril-checkpoint " + std::to_string(Checkpoint::kLayoutVersion) + "\n";
    out += header.dump() + "\n";
    for (const auto& [name, net] : ckpt.networks) {
        for (double v : net.params()) {
            out += format_double(v);
            out += '\n';
        }
    }
    return out;
}

Checkpoint parse_checkpoint(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("inril-checkpoint ", 0) != 0) {
        throw ParseError("checkpoint: missing 'inril-checkpoint' magic line");
    }
    if (std::stoi(line.substr(17)) != Checkpoint::kLayoutVersion) {
        throw ParseError("checkpoint: unsupported layout version " + line.substr(17));
    }
    if (!std::getline(in, line)) throw ParseError("checkpoint: missing header");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint header: ") + e.what());
    }
    Checkpoint ckpt;
    try {
        ckpt.seed = header.at("seed").get<std::uint64_t>();
        ckpt.step = header.at("step").get<std::uint64_t>();
        ckpt.meta = header.at("meta").dump();
        std::size_t lineno = 2;
        for (const auto& n : header.at("networks")) {
            MlpSpec spec;
            spec.layer_widths = n.at("layer_widths").get<std::vector<std::size_t>>();
            spec.activation = parse_activation(n.at("activation").get<std::string>());
            spec.head = parse_head(n.at("head").get<std::string>());
            const auto count = n.at("num_params").get<std::size_t>();
            if (count != spec.num_params()) throw ParseError("checkpoint: num_params disagrees with layer widths");
            ParamVector p(count);
            for (std::size_t i = 0; i < count; ++i) {
                ++lineno;
                if (!std::getline(in, line)) throw ParseError("checkpoint: truncated parameter array");
                p[i] = parse_double(line, "checkpoint line " + std::to_string(lineno));
            }
            ckpt.networks.emplace_back(n.at("name").get<std::string>(), Mlp(spec, std::move(p)));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint header: ") + e.what());
    }
    if (std::getline(in, line) && !line.empty()) throw ParseError("checkpoint: trailing data");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    write_text_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_text_file(path)); }

}  // namespace inril
