#include "oarseg/adversarial.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace oarseg::nn {

namespace {

void check_pair(const torch::Tensor& image, const torch::Tensor& logits) {
    if (image.sizes() != logits.sizes()) throw std::invalid_argument("encoding: image and logits shape mismatch");
}

}  // namespace

EncodingLayout layout_for(DiscriminatorKind kind) {
    switch (kind) {
        case DiscriminatorKind::product: return EncodingLayout::single_channel_product;
        case DiscriminatorKind::early_fusion: return EncodingLayout::two_channel;
        case DiscriminatorKind::late_fusion: return EncodingLayout::two_branch;
    }
    throw std::invalid_argument("unknown discriminator kind");
}

torch::Tensor encode_product(const torch::Tensor& image, const torch::Tensor& logits) {
    check_pair(image, logits);
    return torch::tanh(logits) * image;
}

torch::Tensor encode_early_fusion(const torch::Tensor& image, const torch::Tensor& logits) {
    check_pair(image, logits);
    return torch::cat({image, torch::sigmoid(logits)}, 1);
}

CriticInput encode_late_fusion(const torch::Tensor& image, const torch::Tensor& logits) {
    check_pair(image, logits);
    return {image, torch::sigmoid(logits)};
}

CriticInput encode(DiscriminatorKind kind, const torch::Tensor& image, const torch::Tensor& logits) {
    switch (kind) {
        case DiscriminatorKind::product: return {encode_product(image, logits), {}};
        case DiscriminatorKind::early_fusion: return {encode_early_fusion(image, logits), {}};
        case DiscriminatorKind::late_fusion: return encode_late_fusion(image, logits);
    }
    throw std::invalid_argument("unknown discriminator kind");
}

torch::Tensor saturated_logits(const torch::Tensor& mask) {
    const double inf = std::numeric_limits<double>::infinity();
    return torch::where(mask > 0.5, torch::full_like(mask, inf), torch::full_like(mask, -inf));
}

EncodedPair encode_pair(DiscriminatorKind kind, const torch::Tensor& image, const torch::Tensor& logits,
                        const torch::Tensor& gt) {
    if (gt.sizes() != image.sizes()) throw std::invalid_argument("encoding: ground truth shape mismatch");
    return {encode(kind, image, logits), encode(kind, image, saturated_logits(gt)), layout_for(kind)};
}

double critic_objective(std::span<const double> fake, std::span<const double> real) {
    if (fake.empty() || real.empty()) throw std::invalid_argument("critic_objective: empty batch");
    if (fake.size() != real.size()) throw std::invalid_argument("critic_objective: batch size mismatch");
    double fake_sum = 0.0, real_sum = 0.0;
    for (double v : fake) fake_sum += v;
    for (double v : real) real_sum += v;
    const auto n = static_cast<double>(fake.size());
    return std::abs(fake_sum / n - real_sum / n);
}

torch::Tensor critic_gap(const torch::Tensor& fake_scores, const torch::Tensor& real_scores) {
    if (fake_scores.numel() == 0 || real_scores.numel() == 0) throw std::invalid_argument("critic_gap: empty batch");
    return fake_scores.mean() - real_scores.mean();
}

torch::Tensor bce_loss(const torch::Tensor& prob, const torch::Tensor& gt, double eps) {
    if (prob.sizes() != gt.sizes()) throw std::invalid_argument("bce_loss: shape mismatch");
    auto p = prob.clamp(eps, 1.0 - eps);
    return -(gt * torch::log(p) + (1.0 - gt) * torch::log(1.0 - p)).mean();
}

torch::Tensor bce_from_logits(const torch::Tensor& logits, const torch::Tensor& gt, double eps) {
    const auto clamped = bce_loss(torch::sigmoid(logits), gt, eps);
    // -log sigmoid(z) = softplus(-z); the where() keeps 0 * inf out of saturated logits.
    namespace F = torch::nn::functional;
    const auto zero = torch::zeros_like(logits);
    const auto pos = torch::where(gt != 0, gt * F::softplus(-logits), zero);
    const auto neg = torch::where(gt != 1, (1.0 - gt) * F::softplus(logits), zero);
    const auto smooth = (pos + neg).mean();
    return smooth + (clamped - smooth).detach();
}

GeneratorLossTerms generator_loss_terms(const torch::Tensor& image, const torch::Tensor& logits,
                                        const torch::Tensor& gt, DiscriminatorKind kind, CriticImpl& critic,
                                        double adversarial_weight) {
    if (critic.kind() != kind) throw std::invalid_argument("critic kind does not match the requested encoding");
    GeneratorLossTerms terms;
    terms.bce = bce_from_logits(logits, gt);
    const auto pair = encode_pair(kind, image, logits, gt);
    torch::Tensor real_scores;
    {
        torch::NoGradGuard guard;
        real_scores = critic.forward(pair.real);
    }
    terms.adversarial = critic_gap(critic.forward(pair.fake), real_scores);
    terms.total = terms.bce - adversarial_weight * terms.adversarial;
    return terms;
}

LossBreakdown composite_generator_loss(const torch::Tensor& image, const torch::Tensor& logits,
                                       const torch::Tensor& gt, DiscriminatorKind kind, CriticImpl& critic,
                                       double adversarial_weight) {
    const auto terms = generator_loss_terms(image, logits, gt, kind, critic, adversarial_weight);
    LossBreakdown out;
    out.total = terms.total.item<double>();
    out.bce = terms.bce.item<double>();
    out.adversarial = terms.adversarial.item<double>();
    out.d_objective = std::abs(out.adversarial);
    for (double v : {out.total, out.bce, out.adversarial})
        if (!std::isfinite(v)) throw std::runtime_error("composite_generator_loss: non-finite loss");
    return out;
}

}  // namespace oarseg::nn
