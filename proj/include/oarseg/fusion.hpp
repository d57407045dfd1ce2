#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "oarseg/data_io.hpp"
#include "oarseg/grid.hpp"
#include "oarseg/organ.hpp"

namespace oarseg {

/// Pre-activation logit map of one binary organ model on one slice.
struct OrganLogits {
    OrganId organ;
    Grid2<double> logits;
};

/// Six logit channels per pixel, channel k holding organ code k+1.
struct LogitStack {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<double> values;  // [channel][row][col]

    double at(std::size_t channel, std::int64_t r, std::int64_t c) const {
        return values[channel * static_cast<std::size_t>(height * width) + static_cast<std::size_t>(r * width + c)];
    }
};

/// Multi-class mask: 0 background, 1..6 organ codes.
using MultiClassMask = Grid2<std::uint8_t>;

/// Orders the maps by organ code regardless of input order. Requires exactly
/// one map per organ, all of the same shape.
LogitStack stack_logits(std::span<const OrganLogits> maps);

/// Per pixel: the organ with the largest logit (lowest code on exact ties),
/// or background when that logit's sigmoid is below 0.5.
MultiClassMask fuse_argmax(const LogitStack& stack);

struct EnsembleCandidate {
    std::string model;
    OrganId organ;
    double val_dsc = 0.0;
    std::string checkpoint;
};

/// Highest validation DSC per organ; the first candidate wins ties. Throws if
/// an organ has no candidate.
std::map<OrganId, EnsembleCandidate> select_ensemble_members(std::span<const EnsembleCandidate> candidates);

struct EnsembleScores {
    std::array<double, kOrganCount> dsc{};  // OrganId order, mean over patients
    double mean = 0.0;                      // unweighted over organs
};

/// Unweighted mean over the six organ scores.
double organ_mean(const std::array<double, kOrganCount>& per_organ);

/// Per-organ volume DSC of fused multi-class volumes against label volumes,
/// averaged over patients. Volumes are paired by position.
EnsembleScores ensemble_scores(std::span<const LabelVolume> fused, std::span<const LabelVolume> truth);

}  // namespace oarseg
