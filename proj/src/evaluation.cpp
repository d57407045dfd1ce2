#include "oarseg/evaluation.hpp"

#include <stdexcept>

#include "oarseg/trainer.hpp"

namespace oarseg::nn {

namespace {

torch::Dtype model_dtype(SegmenterImpl& model) {
    const auto params = model.parameters();
    return params.empty() ? torch::kFloat32 : params.front().scalar_type();
}

}  // namespace

torch::Tensor volume_logits(SegmenterImpl& model, const CtVolume& volume, HuWindow window, int batch_size) {
    const auto& s = volume.shape;
    std::vector<double> normalized(volume.voxels.size());
    for (std::size_t i = 0; i < normalized.size(); ++i) normalized[i] = normalize_value(volume.voxels[i], window);
    auto images = torch::from_blob(normalized.data(), {s.slices, 1, s.height, s.width}, torch::kFloat64)
                      .to(model_dtype(model), false, true);
    return predict_logits(model, images, batch_size).squeeze(1).to(torch::kFloat64).contiguous();
}

BinaryMaskVolume threshold_logits(const std::string& patient_id, const torch::Tensor& logits) {
    if (logits.dim() != 3) throw std::invalid_argument("threshold_logits: expected [S,H,W]");
    auto mask = (logits >= 0).to(torch::kUInt8).contiguous();
    BinaryMaskVolume out{patient_id, {logits.size(0), logits.size(1), logits.size(2)}, {}};
    const auto* p = mask.data_ptr<std::uint8_t>();
    out.masks.assign(p, p + mask.numel());
    return out;
}

BinaryMaskVolume organ_volume(const LabelVolume& labels, OrganId organ) {
    BinaryMaskVolume out{labels.patient_id, labels.shape, std::vector<std::uint8_t>(labels.labels.size())};
    const auto code = static_cast<std::uint8_t>(organ_code(organ));
    for (std::size_t i = 0; i < out.masks.size(); ++i) out.masks[i] = labels.labels[i] == code;
    return out;
}

MetricRow evaluate_model(SegmenterImpl& model, const std::vector<const PatientVolumes*>& test, OrganId organ,
                         const std::string& model_name, HuWindow window, int batch_size) {
    if (test.empty()) throw std::invalid_argument("evaluate_model: no test patients");
    std::vector<PatientMetrics> patients;
    for (const auto* pv : test) {
        const auto pred = threshold_logits(pv->image.patient_id, volume_logits(model, pv->image, window, batch_size));
        patients.push_back(patient_metrics(pred, organ_volume(pv->labels, organ)));
    }
    return summarize_patients(std::string(organ_name(organ)), model_name, patients);
}

LabelVolume fuse_volume(const std::string& patient_id, const std::array<torch::Tensor, kOrganCount>& logits) {
    const auto sizes = logits[0].sizes();
    for (const auto& t : logits)
        if (t.sizes() != sizes || t.dim() != 3) throw std::invalid_argument("fuse_volume: shape mismatch across organs");
    const Shape3 shape{sizes[0], sizes[1], sizes[2]};
    LabelVolume out{patient_id, shape, std::vector<std::uint8_t>(static_cast<std::size_t>(shape.voxel_count()))};

    std::array<torch::Tensor, kOrganCount> contiguous;
    for (int k = 0; k < kOrganCount; ++k) contiguous[k] = logits[k].to(torch::kFloat64).contiguous();
    const auto pixels = shape.slice_size();
    for (std::int64_t s = 0; s < shape.slices; ++s) {
        std::vector<OrganLogits> maps;
        for (auto organ : kAllOrgans) {
            Grid2<double> g(shape.height, shape.width);
            const double* src = contiguous[organ_index(organ)].data_ptr<double>() + s * pixels;
            std::copy(src, src + pixels, g.data.begin());
            maps.push_back({organ, std::move(g)});
        }
        const auto fused = fuse_argmax(stack_logits(maps));
        std::copy(fused.data.begin(), fused.data.end(), out.labels.begin() + s * pixels);
    }
    return out;
}

EnsembleEvaluation evaluate_ensemble(const std::map<OrganId, Segmenter>& members,
                                     const std::vector<const PatientVolumes*>& test, HuWindow window,
                                     int batch_size) {
    for (auto organ : kAllOrgans)
        if (!members.contains(organ) || !members.at(organ))
            throw std::invalid_argument("ensemble is missing a model for " + std::string(organ_name(organ)));
    if (test.empty()) throw std::invalid_argument("evaluate_ensemble: no test patients");

    EnsembleEvaluation out;
    std::vector<LabelVolume> truth;
    for (const auto* pv : test) {
        std::array<torch::Tensor, kOrganCount> logits;
        for (auto organ : kAllOrgans) {
            logits[organ_index(organ)] = volume_logits(*members.at(organ), pv->image, window, batch_size);
            const auto pred = threshold_logits(pv->image.patient_id, logits[organ_index(organ)]);
            out.binary_dsc[organ_index(organ)] += dsc_volume(pred, organ_volume(pv->labels, organ));
        }
        out.fused_volumes.push_back(fuse_volume(pv->image.patient_id, logits));
        truth.push_back(pv->labels);
    }
    for (auto& v : out.binary_dsc) v /= static_cast<double>(test.size());
    out.fused = ensemble_scores(out.fused_volumes, truth);
    return out;
}

}  // namespace oarseg::nn
