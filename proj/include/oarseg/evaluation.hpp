#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "oarseg/data_io.hpp"
#include "oarseg/fusion.hpp"
#include "oarseg/metrics.hpp"
#include "oarseg/models.hpp"

namespace oarseg::nn {

/// Pre-activation logits for every slice of a volume as float64 [S,H,W].
torch::Tensor volume_logits(SegmenterImpl& model, const CtVolume& volume, HuWindow window, int batch_size = 8);

/// Thresholds sigmoid(logits) at 0.5.
BinaryMaskVolume threshold_logits(const std::string& patient_id, const torch::Tensor& logits);
BinaryMaskVolume organ_volume(const LabelVolume& labels, OrganId organ);

/// Per-patient DSC (volume) and HD95 (per slice, averaged), then mean/min/max.
MetricRow evaluate_model(SegmenterImpl& model, const std::vector<const PatientVolumes*>& test, OrganId organ,
                         const std::string& model_name, HuWindow window, int batch_size = 8);

/// Fuses six [S,H,W] logit volumes (OrganId order) slice by slice.
LabelVolume fuse_volume(const std::string& patient_id, const std::array<torch::Tensor, kOrganCount>& logits);

struct EnsembleEvaluation {
    EnsembleScores fused;
    std::array<double, kOrganCount> binary_dsc{};  // each member alone, same patients
    std::vector<LabelVolume> fused_volumes;
};

EnsembleEvaluation evaluate_ensemble(const std::map<OrganId, Segmenter>& members,
                                     const std::vector<const PatientVolumes*>& test, HuWindow window,
                                     int batch_size = 8);

}  // namespace oarseg::nn
