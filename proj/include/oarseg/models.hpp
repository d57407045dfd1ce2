#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

namespace oarseg::nn {

struct GeneratorConfig {
    int depth = 3;          // encoder levels, each followed by 2x downsampling
    int base_channels = 8;  // width of the first level, doubled per level
    double leaky_slope = 0.2;
    int in_channels = 1;
    int out_channels = 1;
    int se_reduction = 4;  // only used by the squeeze-excitation variant

    static GeneratorConfig full_scale() { return {5, 64, 0.2, 1, 1, 16}; }
    static GeneratorConfig test_scale() { return {3, 8, 0.2, 1, 1, 4}; }

    void validate() const;
    /// Input height and width must be multiples of this.
    std::int64_t spatial_multiple() const { return std::int64_t{1} << depth; }
};

enum class DiscriminatorKind { product, early_fusion, late_fusion };

std::string_view kind_name(DiscriminatorKind kind);
DiscriminatorKind parse_kind(std::string_view name);

struct DiscriminatorConfig {
    /// Widths of the four stride-2 blocks. Late fusion uses the first three
    /// in each branch and the fourth for the joint block.
    std::vector<int> channels{32, 64, 128, 256};
    double leaky_slope = 0.2;

    static DiscriminatorConfig test_scale() { return {{8, 16, 32, 64}, 0.2}; }
    void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);
void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

/// Any network mapping a [N,1,H,W] slice batch to [N,1,H,W] logits.
class SegmenterImpl : public torch::nn::Module {
public:
    virtual torch::Tensor forward(torch::Tensor x) = 0;
    /// Sets the final 1x1 convolution to zero so every logit is zero.
    virtual void zero_output_layer() = 0;
    virtual std::string architecture() const = 0;
};
using Segmenter = std::shared_ptr<SegmenterImpl>;

/// Critic input. `secondary` is only defined for the two-branch layout.
struct CriticInput {
    torch::Tensor primary;
    torch::Tensor secondary;
};

/// Maps an encoded (image, mask) batch to one score per item, shape [N].
class CriticImpl : public torch::nn::Module {
public:
    virtual torch::Tensor forward(const CriticInput& input) = 0;
    virtual DiscriminatorKind kind() const = 0;
    /// Zero weight on the scoring layer: every input scores its bias.
    virtual void zero_output_layer() = 0;
};
using Critic = std::shared_ptr<CriticImpl>;

/// Channel gate: global average pool, bottleneck of `channels / reduction`,
/// sigmoid, then channelwise scaling of the input.
class SEBlockImpl : public torch::nn::Module {
public:
    SEBlockImpl(int channels, int reduction);
    torch::Tensor forward(const torch::Tensor& x);
    /// Per-channel gates in (0,1), shape [N,C].
    torch::Tensor gates(const torch::Tensor& x);
    void zero_init();

private:
    torch::nn::Linear squeeze_{nullptr};
    torch::nn::Linear excite_{nullptr};
};
TORCH_MODULE(SEBlock);

torch::Tensor se_block(SEBlock& block, const torch::Tensor& features);

class UNetImpl : public SegmenterImpl {
public:
    UNetImpl(const GeneratorConfig& config, bool squeeze_excitation);
    torch::Tensor forward(torch::Tensor x) override;
    void zero_output_layer() override;
    std::string architecture() const override { return se_ ? "se-resunet" : "unet"; }
    const GeneratorConfig& config() const { return config_; }

private:
    torch::nn::Sequential make_block(int in, int out, const std::string& name);

    GeneratorConfig config_;
    bool se_;
    std::vector<torch::nn::Sequential> encoders_;
    torch::nn::Sequential bottleneck_{nullptr};
    std::vector<torch::nn::ConvTranspose2d> upsamplers_;
    std::vector<torch::nn::Sequential> decoders_;
    torch::nn::Conv2d head_{nullptr};
};

/// Stride-2 convolution trunk with global average pooling and a linear score.
/// One input channel for the product encoding, two for early fusion.
class ConvCriticImpl : public CriticImpl {
public:
    ConvCriticImpl(DiscriminatorKind kind, const DiscriminatorConfig& config);
    torch::Tensor forward(const CriticInput& input) override;
    DiscriminatorKind kind() const override { return kind_; }
    void zero_output_layer() override;

private:
    DiscriminatorKind kind_;
    torch::nn::Sequential trunk_{nullptr};
    torch::nn::Linear score_{nullptr};
};

/// Image and mask pass through separate three-block branches; the feature
/// maps are concatenated and merged by one joint block.
class LateFusionCriticImpl : public CriticImpl {
public:
    explicit LateFusionCriticImpl(const DiscriminatorConfig& config);
    torch::Tensor forward(const CriticInput& input) override;
    DiscriminatorKind kind() const override { return DiscriminatorKind::late_fusion; }
    void zero_output_layer() override;

    torch::nn::Sequential& image_branch() { return image_branch_; }
    torch::nn::Sequential& mask_branch() { return mask_branch_; }

private:
    torch::nn::Sequential image_branch_{nullptr};
    torch::nn::Sequential mask_branch_{nullptr};
    torch::nn::Sequential joint_{nullptr};
    torch::nn::Linear score_{nullptr};
};

/// Names accepted on the command line and in plans.
enum class ModelFamily { unet, se_resunet, gan };

struct ModelSpec {
    std::string name;  // canonical: unet, se-resunet, gan-prod, gan-early, gan-late
    ModelFamily family = ModelFamily::unet;
    std::optional<DiscriminatorKind> discriminator;

    bool adversarial() const { return discriminator.has_value(); }
};

ModelSpec parse_model(std::string_view name);

/// Deterministic given the seed (reseeds libtorch's global generator).
Segmenter build_generator(const GeneratorConfig& config, std::uint64_t seed);
Critic build_discriminator(DiscriminatorKind kind, const DiscriminatorConfig& config, std::uint64_t seed);
/// "unet_supervised"/"unet" is the generator itself; "se_resunet"/"se-resunet"
/// swaps each convolution pair for a residual squeeze-excitation block.
Segmenter build_baseline(std::string_view name, const GeneratorConfig& config, std::uint64_t seed);

torch::Tensor generator_forward(SegmenterImpl& model, const torch::Tensor& image);

/// Named parameter snapshot (deep copies), in registration order.
using ParameterSnapshot = std::vector<std::pair<std::string, torch::Tensor>>;
ParameterSnapshot snapshot_parameters(const torch::nn::Module& module);
void restore_parameters(torch::nn::Module& module, const ParameterSnapshot& snapshot);
std::int64_t parameter_count(const torch::nn::Module& module);

torch::Dtype parse_dtype(std::string_view name);
std::string_view dtype_name(torch::Dtype dtype);

}  // namespace oarseg::nn
