#pragma once

#include <span>

#include <torch/torch.h>

#include "oarseg/models.hpp"

namespace oarseg::nn {

inline constexpr double kBceEpsilon = 1e-7;

enum class EncodingLayout { single_channel_product, two_channel, two_branch };

EncodingLayout layout_for(DiscriminatorKind kind);

/// tanh(logits) * image: mask encoded in (-1, 1) before the product.
torch::Tensor encode_product(const torch::Tensor& image, const torch::Tensor& logits);
/// Channel 0 image, channel 1 sigmoid(logits).
torch::Tensor encode_early_fusion(const torch::Tensor& image, const torch::Tensor& logits);
/// Branch A image, branch B sigmoid(logits); no mixing.
CriticInput encode_late_fusion(const torch::Tensor& image, const torch::Tensor& logits);

CriticInput encode(DiscriminatorKind kind, const torch::Tensor& image, const torch::Tensor& logits);

/// Logits whose activations reproduce a binary mask exactly:
/// +inf on foreground, -inf on background. tanh maps them to {-1, 1},
/// sigmoid to {0, 1}.
torch::Tensor saturated_logits(const torch::Tensor& mask);

struct EncodedPair {
    CriticInput fake;  // built from the generator logits
    CriticInput real;  // built from the ground truth through the same encoding
    EncodingLayout layout;
};

EncodedPair encode_pair(DiscriminatorKind kind, const torch::Tensor& image, const torch::Tensor& logits,
                        const torch::Tensor& gt);

/// |mean(fake) - mean(real)|. Both batches must be non-empty and equal length.
double critic_objective(std::span<const double> fake_scores, std::span<const double> real_scores);
/// mean(fake) - mean(real) as a differentiable scalar.
torch::Tensor critic_gap(const torch::Tensor& fake_scores, const torch::Tensor& real_scores);

/// Mean binary cross-entropy with probabilities clamped to [eps, 1-eps].
torch::Tensor bce_loss(const torch::Tensor& prob, const torch::Tensor& gt, double eps = kBceEpsilon);

/// bce_loss(sigmoid(logits), gt) as a value. The gradient is taken from the
/// unclamped logit-space form, so pixels whose probability left [eps, 1-eps]
/// on the wrong side still pull back; inside the clamp range both agree.
torch::Tensor bce_from_logits(const torch::Tensor& logits, const torch::Tensor& gt, double eps = kBceEpsilon);

struct GeneratorLossTerms {
    torch::Tensor total;        // bce - weight * adversarial
    torch::Tensor bce;
    torch::Tensor adversarial;  // mean D(fake) - mean D(real)
};

/// Generator objective. The critic is evaluated on the fake and real
/// encodings; only the fake path carries gradient to the generator.
GeneratorLossTerms generator_loss_terms(const torch::Tensor& image, const torch::Tensor& logits,
                                        const torch::Tensor& gt, DiscriminatorKind kind, CriticImpl& critic,
                                        double adversarial_weight = 1.0);

struct LossBreakdown {
    double total = 0.0;
    double bce = 0.0;
    double adversarial = 0.0;
    double d_objective = 0.0;  // |adversarial|, the critic's own objective
};

LossBreakdown composite_generator_loss(const torch::Tensor& image, const torch::Tensor& logits,
                                       const torch::Tensor& gt, DiscriminatorKind kind, CriticImpl& critic,
                                       double adversarial_weight = 1.0);

}  // namespace oarseg::nn
