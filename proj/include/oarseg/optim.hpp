#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace oarseg::nn {

struct AdamHyper {
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 5e-4;  // added to the gradient as an L2 term
};

/// First/second moment estimates, one pair per parameter tensor.
struct AdamState {
    std::vector<torch::Tensor> first_moment;
    std::vector<torch::Tensor> second_moment;
    std::int64_t step = 0;
};

/// One bias-corrected Adam update, in place on `params`. Moments are created
/// on the first call. Throws on non-finite gradients before touching anything.
void adam_step(std::vector<torch::Tensor>& params, const std::vector<torch::Tensor>& grads, AdamState& state,
               const AdamHyper& hyper, double lr);

/// adam_step over the module's parameters and their .grad() (undefined
/// gradients count as zero).
void adam_step(torch::nn::Module& module, AdamState& state, const AdamHyper& hyper, double lr);

/// Clamps every parameter into [-limit, limit].
void clip_weights(torch::nn::Module& module, double limit);

}  // namespace oarseg::nn
