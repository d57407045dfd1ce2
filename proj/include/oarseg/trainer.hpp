#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "oarseg/data_io.hpp"
#include "oarseg/metrics.hpp"
#include "oarseg/models.hpp"
#include "oarseg/optim.hpp"

namespace oarseg::nn {

enum class TrainMode { supervised, adversarial };

struct TrainConfig {
    double lr0 = 1e-5;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 5e-4;
    int batch_size = 8;
    double lr_factor = 0.2;
    int lr_patience = 10;
    int stop_patience = 14;
    double improvement_threshold = 1e-4;
    int max_epochs = 500;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::supervised;
    std::optional<DiscriminatorKind> discriminator;

    double adversarial_weight = 1.0;
    int critic_steps = 1;      // critic updates per generator update
    double weight_clip = 0.0;  // > 0 clamps critic weights after each update
    bool freeze_critic = false;

    std::string dtype = "float32";
    bool roi_only = false;  // keep only slices where the organ is present
    HuWindow window;
    GeneratorConfig generator = GeneratorConfig::test_scale();
    DiscriminatorConfig critic = DiscriminatorConfig::test_scale();

    void validate() const;
    AdamHyper adam() const { return {beta1, beta2, eps, weight_decay}; }
};

/// Slices of several patients stacked into [N,1,H,W] tensors. Slices of one
/// patient are contiguous and in slice order.
struct SliceDataset {
    torch::Tensor images;
    torch::Tensor masks;
    std::vector<std::string> patient_ids;  // one per patient, in order
    std::vector<std::int64_t> patient_offset;
    std::vector<std::int64_t> patient_slices;

    std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
    std::int64_t height() const { return images.size(2); }
    std::int64_t width() const { return images.size(3); }
};

SliceDataset make_slice_dataset(const std::vector<const PatientVolumes*>& patients, OrganId organ, HuWindow window,
                                torch::Dtype dtype, bool roi_only = false);

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_bce = 0.0;
    double train_adv = 0.0;
    double d_objective = 0.0;
    double val_loss = 0.0;
    double val_dsc = 0.0;
};

struct RunState {
    int epoch = 0;
    double current_lr = 0.0;
    double best_val_loss = 0.0;
    double best_val_dsc = 0.0;
    int best_epoch = 0;
    int epochs_since_improvement = 0;
    int lr_drops = 0;
    bool stopped_early = false;
    bool never_improved = false;
    std::vector<EpochRecord> history;
};

/// Everything the optimizers mutate during a run.
struct TrainingSession {
    Segmenter generator;
    Critic critic;  // null for supervised runs
    TrainConfig config;
    AdamState generator_state;
    AdamState critic_state;
    double lr = 0.0;

    TrainingSession(Segmenter generator, Critic critic, TrainConfig config);
};

/// Fisher-Yates order of [0, n) derived from (seed, epoch).
std::vector<std::int64_t> epoch_order(std::int64_t n, std::uint64_t seed, int epoch);

/// One pass minimizing BCE. Fills lr and train_bce.
EpochRecord train_epoch_supervised(TrainingSession& session, const SliceDataset& data, int epoch);

/// One pass of alternating critic / generator updates. Fills lr, train_bce,
/// train_adv and d_objective with per-batch means.
EpochRecord train_epoch_adversarial(TrainingSession& session, const SliceDataset& data, int epoch);

struct Validation {
    double loss = 0.0;  // BCE over all validation pixels
    double dsc = 0.0;   // mean per-patient volume DSC at threshold 0.5
};

Validation validate(SegmenterImpl& model, const SliceDataset& data, int batch_size);

/// Logits for every slice of `data`, shape [N,1,H,W], evaluation mode.
torch::Tensor predict_logits(SegmenterImpl& model, const torch::Tensor& images, int batch_size);

struct FitResult {
    ParameterSnapshot best;  // lowest validation loss (initial weights if never improved)
    RunState state;
};

using EpochCallback = std::function<void(const EpochRecord&, const RunState&)>;

/// Trains until early stopping or max_epochs, decaying the learning rate on
/// validation plateaus, and keeps the weights of the lowest validation loss.
FitResult fit(TrainingSession& session, const SliceDataset& train, const SliceDataset& val,
              const EpochCallback& on_epoch = {});

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);
std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path);

}  // namespace oarseg::nn
