#include "oarseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace oarseg::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr const char* kManifest = "manifest.json";

json split_to_json(const DatasetSplit& s) {
    return {{"train", s.train_ids}, {"val", s.val_ids}, {"test", s.test_ids}};
}

DatasetSplit split_from_json(const json& j) {
    return {j.at("train").get<std::vector<std::string>>(), j.at("val").get<std::vector<std::string>>(),
            j.at("test").get<std::vector<std::string>>()};
}

json meta_to_json(const CheckpointMeta& meta) {
    json j;
    j["architecture"] = meta.architecture;
    j["organ"] = meta.organ;
    j["config"] = meta.generator;
    j["seed"] = meta.seed;
    j["epoch"] = meta.epoch;
    j["val_loss"] = meta.val_loss;
    j["val_dsc"] = meta.val_dsc;
    j["dtype"] = meta.dtype;
    j["window"] = {meta.window.lo, meta.window.hi};
    if (meta.split) j["split"] = split_to_json(*meta.split);
    if (!meta.data.empty()) j["data"] = meta.data;
    return j;
}

std::string file_for(const std::string& name) { return name + ".raw"; }

}  // namespace

void save_checkpoint(const fs::path& dir, const ParameterSnapshot& params, const CheckpointMeta& meta) {
    fs::create_directories(dir);
    json manifest = meta_to_json(meta);
    const auto dtype = parse_dtype(meta.dtype);
    json table = json::array();
    for (const auto& [name, value] : params) {
        auto t = value.detach().to(dtype).contiguous();
        table.push_back({{"name", name}, {"shape", t.sizes().vec()}, {"file", file_for(name)}});
        std::ofstream out(dir / file_for(name), std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write parameter file in " + dir.string());
        out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
    }
    manifest["parameters"] = std::move(table);
    std::ofstream out(dir / kManifest, std::ios::trunc);
    out << manifest.dump(2) << '\n';
}

void save_checkpoint(const fs::path& dir, const torch::nn::Module& module, const CheckpointMeta& meta) {
    save_checkpoint(dir, snapshot_parameters(module), meta);
}

CheckpointMeta read_checkpoint_meta(const fs::path& dir) {
    const fs::path path = dir / kManifest;
    if (!fs::exists(path)) throw std::runtime_error("missing checkpoint: " + path.string());
    std::ifstream in(path);
    const json j = json::parse(in);
    CheckpointMeta meta;
    meta.architecture = j.at("architecture").get<std::string>();
    meta.organ = j.value("organ", std::string());
    meta.generator = j.at("config").get<GeneratorConfig>();
    meta.seed = j.value("seed", std::uint64_t{0});
    meta.epoch = j.value("epoch", 0);
    meta.val_loss = j.value("val_loss", 0.0);
    meta.val_dsc = j.value("val_dsc", 0.0);
    meta.dtype = j.value("dtype", std::string("float32"));
    if (j.contains("window")) {
        const auto w = j.at("window").get<std::vector<double>>();
        if (w.size() == 2) meta.window = {w[0], w[1]};
    }
    if (j.contains("split")) meta.split = split_from_json(j.at("split"));
    if (j.contains("data")) meta.data = j.at("data").get<std::string>();
    return meta;
}

void load_parameters(const fs::path& dir, torch::nn::Module& module) {
    std::ifstream in(dir / kManifest);
    if (!in) throw std::runtime_error("missing checkpoint: " + (dir / kManifest).string());
    const json manifest = json::parse(in);
    const auto dtype = parse_dtype(manifest.value("dtype", std::string("float32")));
    auto params = module.named_parameters();
    const auto& table = manifest.at("parameters");
    if (table.size() != params.size())
        throw std::runtime_error("checkpoint has " + std::to_string(table.size()) + " parameters, model has " +
                                 std::to_string(params.size()));

    torch::NoGradGuard guard;
    for (const auto& entry : table) {
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
        auto* target = params.find(name);
        if (!target) throw std::runtime_error("checkpoint parameter '" + name + "' not in model");
        if (target->sizes().vec() != shape) throw std::runtime_error("checkpoint parameter '" + name + "' shape mismatch");

        std::ifstream raw(dir / entry.at("file").get<std::string>(), std::ios::binary);
        if (!raw) throw std::runtime_error("missing parameter file for '" + name + "'");
        std::vector<char> bytes((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
        auto value = torch::empty(shape, torch::TensorOptions().dtype(dtype));
        if (bytes.size() != value.nbytes()) throw std::runtime_error("parameter file for '" + name + "' has wrong size");
        std::memcpy(value.data_ptr(), bytes.data(), bytes.size());
        target->copy_(value.to(target->dtype()));
    }
}

LoadedSegmenter load_segmenter(const fs::path& dir) {
    LoadedSegmenter out;
    out.meta = read_checkpoint_meta(dir);
    const auto spec = parse_model(out.meta.architecture);
    out.model = spec.family == ModelFamily::se_resunet ? build_baseline("se-resunet", out.meta.generator, 0)
                                                       : build_generator(out.meta.generator, 0);
    out.model->to(parse_dtype(out.meta.dtype));
    load_parameters(dir, *out.model);
    out.model->eval();
    return out;
}

}  // namespace oarseg::nn
