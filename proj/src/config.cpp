#include "oarseg/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace oarseg::nn {

namespace {

template <typename T>
T required_as(const toml::node& node, const std::string& key) {
    if constexpr (std::is_same_v<T, double>) {
        if (auto v = node.value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node.as_boolean()) return v->get();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = node.as_string()) return v->get();
    } else {
        if (auto v = node.as_integer()) return static_cast<T>(v->get());
    }
    throw ConfigError("config key '" + key + "' has the wrong type");
}

template <typename T>
std::vector<T> array_of(const toml::node& node, const std::string& key) {
    const auto* arr = node.as_array();
    if (!arr) throw ConfigError("config key '" + key + "' must be an array");
    std::vector<T> out;
    for (const auto& item : *arr) out.push_back(required_as<T>(item, key));
    return out;
}

GeneratorConfig generator_from_toml(const toml::table& t, GeneratorConfig g) {
    for (const auto& [k, node] : t) {
        const std::string key(k.str());
        if (key == "depth") g.depth = required_as<int>(node, key);
        else if (key == "base_channels") g.base_channels = required_as<int>(node, key);
        else if (key == "leaky_slope") g.leaky_slope = required_as<double>(node, key);
        else if (key == "se_reduction") g.se_reduction = required_as<int>(node, key);
        else throw ConfigError("unknown generator key '" + key + "'");
    }
    return g;
}

DiscriminatorConfig critic_from_toml(const toml::table& t, DiscriminatorConfig c) {
    for (const auto& [k, node] : t) {
        const std::string key(k.str());
        if (key == "channels") c.channels = array_of<int>(node, key);
        else if (key == "leaky_slope") c.leaky_slope = required_as<double>(node, key);
        else throw ConfigError("unknown critic key '" + key + "'");
    }
    return c;
}

toml::table parse_toml(const std::string& text, const std::string& source) {
    try {
        return toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << source << ": " << e.description() << " at line " << e.source().begin.line;
        throw ConfigError(msg.str());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

TrainConfig train_config_from_toml(const toml::table& table, TrainConfig c) {
    for (const auto& [k, node] : table) {
        const std::string key(k.str());
        if (key == "lr0") c.lr0 = required_as<double>(node, key);
        else if (key == "beta1") c.beta1 = required_as<double>(node, key);
        else if (key == "beta2") c.beta2 = required_as<double>(node, key);
        else if (key == "eps") c.eps = required_as<double>(node, key);
        else if (key == "weight_decay") c.weight_decay = required_as<double>(node, key);
        else if (key == "batch_size") c.batch_size = required_as<int>(node, key);
        else if (key == "lr_factor") c.lr_factor = required_as<double>(node, key);
        else if (key == "lr_patience") c.lr_patience = required_as<int>(node, key);
        else if (key == "stop_patience") c.stop_patience = required_as<int>(node, key);
        else if (key == "improvement_threshold") c.improvement_threshold = required_as<double>(node, key);
        else if (key == "max_epochs") c.max_epochs = required_as<int>(node, key);
        else if (key == "seed") c.seed = required_as<std::uint64_t>(node, key);
        else if (key == "mode") {
            const auto mode = required_as<std::string>(node, key);
            if (mode == "supervised") c.mode = TrainMode::supervised;
            else if (mode == "adversarial") c.mode = TrainMode::adversarial;
            else throw ConfigError("mode must be 'supervised' or 'adversarial'");
        } else if (key == "discriminator") {
            try {
                c.discriminator = parse_kind(required_as<std::string>(node, key));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        } else if (key == "adversarial_weight") c.adversarial_weight = required_as<double>(node, key);
        else if (key == "critic_steps") c.critic_steps = required_as<int>(node, key);
        else if (key == "weight_clip") c.weight_clip = required_as<double>(node, key);
        else if (key == "freeze_critic") c.freeze_critic = required_as<bool>(node, key);
        else if (key == "dtype") c.dtype = required_as<std::string>(node, key);
        else if (key == "roi_only") c.roi_only = required_as<bool>(node, key);
        else if (key == "window") {
            const auto w = array_of<double>(node, key);
            if (w.size() != 2) throw ConfigError("window must be [lo, hi]");
            c.window = {w[0], w[1]};
        } else if (key == "generator") {
            if (!node.is_table()) throw ConfigError("generator must be a table");
            c.generator = generator_from_toml(*node.as_table(), c.generator);
        } else if (key == "critic") {
            if (!node.is_table()) throw ConfigError("critic must be a table");
            c.critic = critic_from_toml(*node.as_table(), c.critic);
        } else {
            throw ConfigError("unknown training key '" + key + "'");
        }
    }
    return c;
}

TrainConfig parse_train_config(const std::string& text, TrainConfig base) {
    auto config = train_config_from_toml(parse_toml(text, "run config"), std::move(base));
    try {
        config.generator.validate();
        config.critic.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return config;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
    return parse_train_config(read_file(path), std::move(base));
}

void ExperimentPlan::validate() const {
    if (data.empty()) throw ConfigError("plan: 'data' is required");
    if (out.empty()) throw ConfigError("plan: 'out' is required");
    if (organs.empty()) throw ConfigError("plan: 'organs' must not be empty");
    if (models.empty()) throw ConfigError("plan: 'models' must not be empty");
    for (const auto& m : models) {
        try {
            parse_model(m);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("plan: ") + e.what());
        }
    }
    for (const auto& f : formats)
        if (f != "csv" && f != "md") throw ConfigError("plan: unknown report format '" + f + "'");
    if (ensemble && organs.size() != kOrganCount) throw ConfigError("plan: an ensemble needs all six organs");
    try {
        TrainConfig probe = train;
        probe.mode = TrainMode::supervised;
        probe.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("plan: ") + e.what());
    }
}

ExperimentPlan parse_plan(const std::string& text, const std::filesystem::path& base_dir) {
    const auto table = parse_toml(text, "plan");
    ExperimentPlan plan;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    for (const auto& [k, node] : table) {
        const std::string key(k.str());
        if (key == "data") plan.data = resolve(required_as<std::string>(node, key));
        else if (key == "out") plan.out = resolve(required_as<std::string>(node, key));
        else if (key == "organs") {
            for (const auto& name : array_of<std::string>(node, key)) {
                if (name == "all") {
                    plan.organs.assign(kAllOrgans.begin(), kAllOrgans.end());
                    continue;
                }
                try {
                    plan.organs.push_back(parse_organ(name));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("plan: ") + e.what());
                }
            }
        } else if (key == "models") plan.models = array_of<std::string>(node, key);
        else if (key == "split_seed") plan.split_seed = required_as<std::uint64_t>(node, key);
        else if (key == "ensemble") plan.ensemble = required_as<bool>(node, key);
        else if (key == "formats") plan.formats = array_of<std::string>(node, key);
        else if (key == "overlay_slices") plan.overlay_slices = array_of<int>(node, key);
        else if (key == "train") {
            if (!node.is_table()) throw ConfigError("plan: train must be a table");
            plan.train = train_config_from_toml(*node.as_table(), plan.train);
        } else {
            throw ConfigError("plan: unknown key '" + key + "'");
        }
    }
    std::set<OrganId> unique(plan.organs.begin(), plan.organs.end());
    if (unique.size() != plan.organs.size()) throw ConfigError("plan: duplicate organ");
    plan.validate();
    return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
    return parse_plan(read_file(path), path.parent_path());
}

}  // namespace oarseg::nn
