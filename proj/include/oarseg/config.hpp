#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "oarseg/organ.hpp"
#include "oarseg/trainer.hpp"

namespace toml {
inline namespace v3 {
class table;
}
}  // namespace toml

namespace oarseg::nn {

/// Raised for malformed run configs and plans.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Overrides `base` with the keys present in `table`. Unknown keys are errors.
TrainConfig train_config_from_toml(const toml::table& table, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});
TrainConfig parse_train_config(const std::string& text, TrainConfig base = {});

struct ExperimentPlan {
    std::filesystem::path data;
    std::filesystem::path out;
    std::vector<OrganId> organs;
    std::vector<std::string> models;
    TrainConfig train;
    std::uint64_t split_seed = 0;
    bool ensemble = false;
    std::vector<std::string> formats{"csv", "md"};
    std::vector<int> overlay_slices;

    void validate() const;
};

/// Relative `data` and `out` paths resolve against the plan file's directory.
ExperimentPlan load_plan(const std::filesystem::path& path);
ExperimentPlan parse_plan(const std::string& text, const std::filesystem::path& base_dir = {});

}  // namespace oarseg::nn
