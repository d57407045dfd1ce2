#include "oarseg/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace oarseg::nn {

namespace tnn = torch::nn;

void GeneratorConfig::validate() const {
    if (depth < 2) throw std::invalid_argument("generator depth must be >= 2");
    if (depth > 8) throw std::invalid_argument("generator depth must be <= 8");
    if (base_channels < 4) throw std::invalid_argument("generator base_channels must be >= 4");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw std::invalid_argument("leaky_slope must be in (0, 1)");
    if (in_channels != 1 || out_channels != 1)
        throw std::invalid_argument("generator takes one input channel and produces one logit channel");
    if (se_reduction < 1) throw std::invalid_argument("se_reduction must be >= 1");
}

void DiscriminatorConfig::validate() const {
    if (channels.size() != 4) throw std::invalid_argument("discriminator needs exactly four block widths");
    for (int c : channels)
        if (c < 1) throw std::invalid_argument("discriminator widths must be positive");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw std::invalid_argument("leaky_slope must be in (0, 1)");
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = {{"depth", c.depth},           {"base_channels", c.base_channels}, {"leaky_slope", c.leaky_slope},
         {"in_channels", c.in_channels}, {"out_channels", c.out_channels},   {"se_reduction", c.se_reduction}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    c.depth = j.value("depth", c.depth);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.out_channels = j.value("out_channels", c.out_channels);
    c.se_reduction = j.value("se_reduction", c.se_reduction);
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
    j = {{"channels", c.channels}, {"leaky_slope", c.leaky_slope}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
    c.channels = j.value("channels", c.channels);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
}

std::string_view kind_name(DiscriminatorKind kind) {
    switch (kind) {
        case DiscriminatorKind::product: return "product";
        case DiscriminatorKind::early_fusion: return "early_fusion";
        case DiscriminatorKind::late_fusion: return "late_fusion";
    }
    return "?";
}

DiscriminatorKind parse_kind(std::string_view name) {
    if (name == "product" || name == "prod") return DiscriminatorKind::product;
    if (name == "early_fusion" || name == "early") return DiscriminatorKind::early_fusion;
    if (name == "late_fusion" || name == "late") return DiscriminatorKind::late_fusion;
    throw std::invalid_argument("unknown discriminator kind '" + std::string(name) + "'");
}

namespace {

tnn::Conv2d conv3x3(int in, int out, int stride = 1) {
    return tnn::Conv2d(tnn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

tnn::LeakyReLU leaky(double slope) { return tnn::LeakyReLU(tnn::LeakyReLUOptions().negative_slope(slope)); }

class ResidualSEBlockImpl : public tnn::Module {
public:
    ResidualSEBlockImpl(int in, int out, double slope, int reduction) : slope_(slope) {
        if (out % reduction != 0)
            throw std::invalid_argument("se_reduction must divide every level width (" + std::to_string(out) + ")");
        conv1_ = register_module("conv1", conv3x3(in, out));
        conv2_ = register_module("conv2", conv3x3(out, out));
        if (in != out) shortcut_ = register_module("shortcut", tnn::Conv2d(tnn::Conv2dOptions(in, out, 1)));
        se_ = register_module("se", SEBlock(out, reduction));
    }

    torch::Tensor forward(torch::Tensor x) {
        auto y = torch::leaky_relu(conv1_->forward(x), slope_);
        y = conv2_->forward(y);
        auto skip = shortcut_ ? shortcut_->forward(x) : x;
        return se_->forward(torch::leaky_relu(y + skip, slope_));
    }

private:
    double slope_;
    tnn::Conv2d conv1_{nullptr};
    tnn::Conv2d conv2_{nullptr};
    tnn::Conv2d shortcut_{nullptr};
    SEBlock se_{nullptr};
};
TORCH_MODULE(ResidualSEBlock);

// Appends a stride-2 conv + LeakyReLU as `<prefix>_conv`, `<prefix>_act`.
void append_critic_block(tnn::Sequential& seq, const std::string& prefix, int in, int out, double slope) {
    seq->push_back(prefix + "_conv", conv3x3(in, out, 2));
    seq->push_back(prefix + "_act", leaky(slope));
}

void check_batch(const torch::Tensor& t, std::int64_t channels, const char* what) {
    if (t.dim() != 4 || t.size(1) != channels)
        throw std::invalid_argument(std::string(what) + ": expected [N," + std::to_string(channels) + ",H,W] input");
}

// He-normal weights (fan-in, LeakyReLU gain) for convolutions, unit gain for linear layers, zero biases.
void he_init(tnn::Module& root, double slope) {
    torch::NoGradGuard guard;
    const double conv_gain = std::sqrt(2.0 / (1.0 + slope * slope));
    auto fill = [](torch::Tensor& w, torch::Tensor& b, double gain, std::int64_t fan_in) {
        w.normal_(0.0, gain / std::sqrt(static_cast<double>(fan_in)));
        if (b.defined()) b.zero_();
    };
    for (auto& m : root.modules(false)) {
        if (auto* c = m->as<tnn::Conv2d>()) {
            fill(c->weight, c->bias, conv_gain, c->weight.size(1) * c->weight.size(2) * c->weight.size(3));
        } else if (auto* t = m->as<tnn::ConvTranspose2d>()) {
            // Kernel 2, stride 2: each output pixel sees one tap per input channel.
            fill(t->weight, t->bias, conv_gain, t->weight.size(0));
        } else if (auto* l = m->as<tnn::Linear>()) {
            fill(l->weight, l->bias, 1.0, l->weight.size(1));
        }
    }
}

}  // namespace

SEBlockImpl::SEBlockImpl(int channels, int reduction) {
    if (reduction < 1 || channels % reduction != 0)
        throw std::invalid_argument("se_block: channels (" + std::to_string(channels) +
                                    ") not divisible by reduction (" + std::to_string(reduction) + ")");
    squeeze_ = register_module("squeeze", tnn::Linear(channels, channels / reduction));
    excite_ = register_module("excite", tnn::Linear(channels / reduction, channels));
}

torch::Tensor SEBlockImpl::gates(const torch::Tensor& x) {
    auto pooled = x.mean({2, 3});
    return torch::sigmoid(excite_->forward(torch::relu(squeeze_->forward(pooled))));
}

torch::Tensor SEBlockImpl::forward(const torch::Tensor& x) {
    return x * gates(x).unsqueeze(-1).unsqueeze(-1);
}

void SEBlockImpl::zero_init() {
    torch::NoGradGuard guard;
    for (auto& p : parameters()) p.zero_();
}

torch::Tensor se_block(SEBlock& block, const torch::Tensor& features) { return block->forward(features); }

UNetImpl::UNetImpl(const GeneratorConfig& config, bool squeeze_excitation) : config_(config), se_(squeeze_excitation) {
    config_.validate();
    const int base = config_.base_channels;
    int in = config_.in_channels;
    for (int level = 0; level < config_.depth; ++level) {
        const int width = base << level;
        encoders_.push_back(register_module("enc" + std::to_string(level), make_block(in, width, "enc")));
        in = width;
    }
    bottleneck_ = register_module("bottleneck", make_block(in, base << config_.depth, "bottleneck"));
    upsamplers_.resize(config_.depth, nullptr);
    decoders_.resize(config_.depth, nullptr);
    for (int level = config_.depth - 1; level >= 0; --level) {
        const int width = base << level;
        upsamplers_[level] = register_module(
            "up" + std::to_string(level),
            tnn::ConvTranspose2d(tnn::ConvTranspose2dOptions(width * 2, width, 2).stride(2)));
        decoders_[level] = register_module("dec" + std::to_string(level), make_block(width * 2, width, "dec"));
    }
    head_ = register_module("head", tnn::Conv2d(tnn::Conv2dOptions(base, config_.out_channels, 1)));
    he_init(*this, config_.leaky_slope);
    torch::NoGradGuard guard;
    head_->weight.normal_(0.0, 1.0 / std::sqrt(static_cast<double>(base)));
}

tnn::Sequential UNetImpl::make_block(int in, int out, const std::string&) {
    tnn::Sequential block;
    if (se_) {
        block->push_back("res", ResidualSEBlock(in, out, config_.leaky_slope, config_.se_reduction));
    } else {
        block->push_back("conv1", conv3x3(in, out));
        block->push_back("act1", leaky(config_.leaky_slope));
        block->push_back("conv2", conv3x3(out, out));
        block->push_back("act2", leaky(config_.leaky_slope));
    }
    return block;
}

torch::Tensor UNetImpl::forward(torch::Tensor x) {
    check_batch(x, config_.in_channels, "generator");
    const auto multiple = config_.spatial_multiple();
    if (x.size(2) % multiple != 0 || x.size(3) % multiple != 0)
        throw std::invalid_argument("spatial dims not divisible by " + std::to_string(multiple) + " (2^depth): got " +
                                    std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)));
    std::vector<torch::Tensor> skips;
    for (auto& enc : encoders_) {
        x = enc->forward(x);
        skips.push_back(x);
        x = torch::max_pool2d(x, 2);
    }
    x = bottleneck_->forward(x);
    for (int level = config_.depth - 1; level >= 0; --level) {
        x = upsamplers_[level]->forward(x);
        x = decoders_[level]->forward(torch::cat({skips[level], x}, 1));
    }
    return head_->forward(x);
}

void UNetImpl::zero_output_layer() {
    torch::NoGradGuard guard;
    head_->weight.zero_();
    head_->bias.zero_();
}

ConvCriticImpl::ConvCriticImpl(DiscriminatorKind kind, const DiscriminatorConfig& config) : kind_(kind) {
    config.validate();
    if (kind == DiscriminatorKind::late_fusion) throw std::invalid_argument("ConvCritic does not handle late fusion");
    int in = kind == DiscriminatorKind::product ? 1 : 2;
    trunk_ = tnn::Sequential();
    for (std::size_t i = 0; i < config.channels.size(); ++i) {
        append_critic_block(trunk_, "block" + std::to_string(i), in, config.channels[i], config.leaky_slope);
        in = config.channels[i];
    }
    register_module("trunk", trunk_);
    score_ = register_module("score", tnn::Linear(in, 1));
    he_init(*this, config.leaky_slope);
}

torch::Tensor ConvCriticImpl::forward(const CriticInput& input) {
    check_batch(input.primary, kind_ == DiscriminatorKind::product ? 1 : 2, "critic");
    auto features = trunk_->forward(input.primary).mean({2, 3});
    return score_->forward(features).squeeze(1);
}

void ConvCriticImpl::zero_output_layer() {
    torch::NoGradGuard guard;
    score_->weight.zero_();
}

LateFusionCriticImpl::LateFusionCriticImpl(const DiscriminatorConfig& config) {
    config.validate();
    auto branch = [&] {
        tnn::Sequential s;
        int in = 1;
        for (int i = 0; i < 3; ++i) {
            append_critic_block(s, "block" + std::to_string(i), in, config.channels[i], config.leaky_slope);
            in = config.channels[i];
        }
        return s;
    };
    image_branch_ = register_module("image_branch", branch());
    mask_branch_ = register_module("mask_branch", branch());
    tnn::Sequential joint;
    append_critic_block(joint, "block3", 2 * config.channels[2], config.channels[3], config.leaky_slope);
    joint_ = register_module("joint", joint);
    score_ = register_module("score", tnn::Linear(config.channels[3], 1));
    he_init(*this, config.leaky_slope);
}

torch::Tensor LateFusionCriticImpl::forward(const CriticInput& input) {
    check_batch(input.primary, 1, "late-fusion critic image branch");
    if (!input.secondary.defined()) throw std::invalid_argument("late-fusion critic needs two inputs");
    check_batch(input.secondary, 1, "late-fusion critic mask branch");
    if (input.primary.sizes() != input.secondary.sizes())
        throw std::invalid_argument("late-fusion critic: branch shape mismatch");
    auto merged = torch::cat({image_branch_->forward(input.primary), mask_branch_->forward(input.secondary)}, 1);
    auto features = joint_->forward(merged).mean({2, 3});
    return score_->forward(features).squeeze(1);
}

void LateFusionCriticImpl::zero_output_layer() {
    torch::NoGradGuard guard;
    score_->weight.zero_();
}

ModelSpec parse_model(std::string_view name) {
    if (name == "unet" || name == "unet_supervised") return {"unet", ModelFamily::unet, std::nullopt};
    if (name == "se-resunet" || name == "se_resunet") return {"se-resunet", ModelFamily::se_resunet, std::nullopt};
    if (name == "gan-prod") return {"gan-prod", ModelFamily::gan, DiscriminatorKind::product};
    if (name == "gan-early") return {"gan-early", ModelFamily::gan, DiscriminatorKind::early_fusion};
    if (name == "gan-late") return {"gan-late", ModelFamily::gan, DiscriminatorKind::late_fusion};
    if (name == "deeplabv3" || name == "deeplab")
        throw std::invalid_argument("model '" + std::string(name) + "' is out of scope (DeepLabV3 is not provided)");
    throw std::invalid_argument("unknown model '" + std::string(name) +
                                "' (expected unet, se-resunet, gan-prod, gan-early or gan-late)");
}

Segmenter build_generator(const GeneratorConfig& config, std::uint64_t seed) {
    torch::manual_seed(seed);
    return std::make_shared<UNetImpl>(config, false);
}

Critic build_discriminator(DiscriminatorKind kind, const DiscriminatorConfig& config, std::uint64_t seed) {
    torch::manual_seed(seed);
    if (kind == DiscriminatorKind::late_fusion) return std::make_shared<LateFusionCriticImpl>(config);
    return std::make_shared<ConvCriticImpl>(kind, config);
}

Segmenter build_baseline(std::string_view name, const GeneratorConfig& config, std::uint64_t seed) {
    const auto spec = parse_model(name);
    switch (spec.family) {
        case ModelFamily::unet: return build_generator(config, seed);
        case ModelFamily::se_resunet: torch::manual_seed(seed); return std::make_shared<UNetImpl>(config, true);
        case ModelFamily::gan: break;
    }
    throw std::invalid_argument("'" + std::string(name) + "' is an adversarial model, not a supervised baseline");
}

torch::Tensor generator_forward(SegmenterImpl& model, const torch::Tensor& image) {
    for (const auto& p : model.parameters())
        if (!torch::isfinite(p).all().item<bool>()) throw std::invalid_argument("generator has non-finite parameters");
    return model.forward(image);
}

ParameterSnapshot snapshot_parameters(const torch::nn::Module& module) {
    ParameterSnapshot out;
    for (const auto& item : module.named_parameters()) out.emplace_back(item.key(), item.value().detach().clone());
    return out;
}

void restore_parameters(torch::nn::Module& module, const ParameterSnapshot& snapshot) {
    torch::NoGradGuard guard;
    auto params = module.named_parameters();
    if (params.size() != snapshot.size()) throw std::invalid_argument("parameter snapshot does not match module");
    for (const auto& [name, value] : snapshot) {
        auto* target = params.find(name);
        if (!target) throw std::invalid_argument("parameter '" + name + "' not found in module");
        if (target->sizes() != value.sizes()) throw std::invalid_argument("parameter '" + name + "' shape mismatch");
        target->copy_(value);
    }
}

std::int64_t parameter_count(const torch::nn::Module& module) {
    std::int64_t n = 0;
    for (const auto& p : module.parameters()) n += p.numel();
    return n;
}

torch::Dtype parse_dtype(std::string_view name) {
    if (name == "float32") return torch::kFloat32;
    if (name == "float64") return torch::kFloat64;
    throw std::invalid_argument("unsupported dtype '" + std::string(name) + "' (float32 or float64)");
}

std::string_view dtype_name(torch::Dtype dtype) {
    if (dtype == torch::kFloat32) return "float32";
    if (dtype == torch::kFloat64) return "float64";
    throw std::invalid_argument("unsupported dtype");
}

}  // namespace oarseg::nn
