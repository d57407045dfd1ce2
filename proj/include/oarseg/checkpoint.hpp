#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>
#include <torch/torch.h>

#include "oarseg/data_io.hpp"
#include "oarseg/models.hpp"

namespace oarseg::nn {

/// Contents of a checkpoint's manifest.json besides the parameter table.
struct CheckpointMeta {
    std::string architecture;  // unet, se-resunet, gan-prod, gan-early, gan-late
    std::string organ;
    GeneratorConfig generator;
    std::uint64_t seed = 0;
    int epoch = 0;
    double val_loss = 0.0;
    double val_dsc = 0.0;
    std::string dtype = "float32";
    HuWindow window;
    std::optional<DatasetSplit> split;
    std::string data;  // dataset directory used for training, if known
};

/// Writes `dir/manifest.json` and one little-endian `<name>.raw` file per
/// named parameter.
void save_checkpoint(const std::filesystem::path& dir, const torch::nn::Module& module, const CheckpointMeta& meta);
void save_checkpoint(const std::filesystem::path& dir, const ParameterSnapshot& params, const CheckpointMeta& meta);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir);

/// Loads parameter values into `module`; names, shapes and dtype must match.
void load_parameters(const std::filesystem::path& dir, torch::nn::Module& module);

struct LoadedSegmenter {
    CheckpointMeta meta;
    Segmenter model;
};

/// Rebuilds the architecture named in the manifest and loads its weights.
LoadedSegmenter load_segmenter(const std::filesystem::path& dir);

}  // namespace oarseg::nn
