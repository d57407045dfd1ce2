#include "oarseg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace oarseg::nn {

void adam_step(std::vector<torch::Tensor>& params, const std::vector<torch::Tensor>& grads, AdamState& state,
               const AdamHyper& hyper, double lr) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].sizes() != grads[i].sizes()) throw std::invalid_argument("adam_step: gradient shape mismatch");
        if (!torch::isfinite(grads[i]).all().item<bool>()) throw std::runtime_error("adam_step: non-finite gradient");
    }
    torch::NoGradGuard guard;
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.push_back(torch::zeros_like(p));
            state.second_moment.push_back(torch::zeros_like(p));
        }
    }
    if (state.first_moment.size() != params.size()) throw std::invalid_argument("adam_step: state does not match");

    ++state.step;
    const double correction1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto g = hyper.weight_decay != 0.0 ? grads[i] + hyper.weight_decay * params[i] : grads[i];
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        m.mul_(hyper.beta1).add_(g, 1.0 - hyper.beta1);
        v.mul_(hyper.beta2).addcmul_(g, g, 1.0 - hyper.beta2);
        auto denom = (v / correction2).sqrt_().add_(hyper.eps);
        params[i].addcdiv_(m / correction1, denom, -lr);
    }
}

void adam_step(torch::nn::Module& module, AdamState& state, const AdamHyper& hyper, double lr) {
    auto params = module.parameters();
    std::vector<torch::Tensor> grads;
    grads.reserve(params.size());
    for (auto& p : params) grads.push_back(p.grad().defined() ? p.grad() : torch::zeros_like(p));
    adam_step(params, grads, state, hyper, lr);
}

void clip_weights(torch::nn::Module& module, double limit) {
    torch::NoGradGuard guard;
    for (auto& p : module.parameters()) p.clamp_(-limit, limit);
}

}  // namespace oarseg::nn
