#include "oarseg/fusion.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "oarseg/metrics.hpp"

namespace oarseg {

LogitStack stack_logits(std::span<const OrganLogits> maps) {
    std::array<const OrganLogits*, kOrganCount> by_organ{};
    for (const auto& m : maps) {
        auto& slot = by_organ[organ_index(m.organ)];
        if (slot) throw std::invalid_argument("stack_logits: duplicate model for " + std::string(organ_name(m.organ)));
        slot = &m;
    }
    for (auto organ : kAllOrgans)
        if (!by_organ[organ_index(organ)])
            throw std::invalid_argument("stack_logits: missing organ model " + std::string(organ_name(organ)));

    const auto& first = by_organ[0]->logits;
    LogitStack stack{first.height, first.width, {}};
    stack.values.reserve(first.size() * kOrganCount);
    for (const auto* m : by_organ) {
        if (m->logits.height != first.height || m->logits.width != first.width)
            throw std::invalid_argument("stack_logits: shape mismatch across organ models");
        stack.values.insert(stack.values.end(), m->logits.data.begin(), m->logits.data.end());
    }
    return stack;
}

MultiClassMask fuse_argmax(const LogitStack& stack) {
    for (double v : stack.values)
        if (!std::isfinite(v)) throw std::invalid_argument("fuse_argmax: non-finite logit");
    MultiClassMask out(stack.height, stack.width);
    for (std::int64_t r = 0; r < stack.height; ++r) {
        for (std::int64_t c = 0; c < stack.width; ++c) {
            std::size_t best = 0;
            for (std::size_t k = 1; k < kOrganCount; ++k)
                if (stack.at(k, r, c) > stack.at(best, r, c)) best = k;
            // sigmoid(x) >= 0.5 exactly when x >= 0
            out(r, c) = stack.at(best, r, c) >= 0.0 ? static_cast<std::uint8_t>(best + 1) : 0;
        }
    }
    return out;
}

std::map<OrganId, EnsembleCandidate> select_ensemble_members(std::span<const EnsembleCandidate> candidates) {
    std::map<OrganId, EnsembleCandidate> chosen;
    for (const auto& c : candidates) {
        auto it = chosen.find(c.organ);
        if (it == chosen.end())
            chosen.emplace(c.organ, c);
        else if (c.val_dsc > it->second.val_dsc)
            it->second = c;
    }
    for (auto organ : kAllOrgans)
        if (!chosen.contains(organ))
            throw std::invalid_argument("ensemble has no candidate for " + std::string(organ_name(organ)));
    return chosen;
}

double organ_mean(const std::array<double, kOrganCount>& per_organ) {
    double sum = 0.0;
    for (double v : per_organ) sum += v;
    return sum / kOrganCount;
}

EnsembleScores ensemble_scores(std::span<const LabelVolume> fused, std::span<const LabelVolume> truth) {
    if (fused.size() != truth.size() || fused.empty())
        throw std::invalid_argument("ensemble_scores: need one fused volume per ground-truth volume");
    EnsembleScores scores;
    for (std::size_t p = 0; p < fused.size(); ++p) {
        if (!(fused[p].shape == truth[p].shape))
            throw std::invalid_argument("ensemble_scores: shape mismatch for " + truth[p].patient_id);
        for (auto organ : kAllOrgans) {
            const auto code = static_cast<std::uint8_t>(organ_code(organ));
            std::vector<std::uint8_t> a(fused[p].labels.size()), b(truth[p].labels.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                a[i] = fused[p].labels[i] == code;
                b[i] = truth[p].labels[i] == code;
            }
            scores.dsc[organ_index(organ)] += dice(a, b);
        }
    }
    for (auto& v : scores.dsc) v /= static_cast<double>(fused.size());
    scores.mean = organ_mean(scores.dsc);
    return scores;
}

}  // namespace oarseg
