#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "oarseg/checkpoint.hpp"
#include "oarseg/config.hpp"
#include "oarseg/data_io.hpp"
#include "oarseg/evaluation.hpp"
#include "oarseg/metrics.hpp"
#include "oarseg/report.hpp"
#include "oarseg/trainer.hpp"

namespace oarseg::nn {

/// Looks up patients by id, in the order given. Throws on an unknown id.
std::vector<const PatientVolumes*> select_patients(const std::vector<PatientVolumes>& dataset,
                                                   const std::vector<std::string>& ids);

/// The training config for one model name: mode and critic kind follow the name.
TrainConfig config_for_model(const ModelSpec& spec, TrainConfig base);

struct TrainedCell {
    CheckpointMeta meta;
    Segmenter model;  // best weights, evaluation mode
    RunState state;
};

/// Trains one (organ, model) pair and writes `dir/checkpoint/` and
/// `dir/history.csv`.
TrainedCell train_cell(const ModelSpec& spec, OrganId organ, const std::vector<PatientVolumes>& dataset,
                       const DatasetSplit& split, TrainConfig config, const std::filesystem::path& dir,
                       std::ostream* log = nullptr, const std::filesystem::path& data_dir = {});

/// Writes the prediction overlay of one slice as PNG.
void write_slice_overlay(SegmenterImpl& model, const PatientVolumes& patient, OrganId organ, std::int64_t slice,
                         HuWindow window, const std::filesystem::path& path);

/// Organ to checkpoint directory, stored as JSON.
struct EnsembleManifest {
    std::string name;
    std::map<OrganId, std::filesystem::path> members;
};

void write_ensemble_manifest(const std::filesystem::path& path, const EnsembleManifest& manifest);
/// Relative member paths resolve against the manifest's directory.
EnsembleManifest read_ensemble_manifest(const std::filesystem::path& path);

struct LoadedEnsemble {
    std::map<OrganId, Segmenter> members;
    HuWindow window;
    std::optional<DatasetSplit> split;  // from the first member's checkpoint
};

/// Loads every member; all must share one HU window.
LoadedEnsemble load_ensemble(const EnsembleManifest& manifest);

struct CellOutcome {
    OrganId organ = OrganId::right_lung;
    std::string model;
    bool ok = false;
    std::string error;
    std::optional<MetricRow> row;
    double val_dsc = 0.0;
    std::filesystem::path checkpoint;
};

struct ExperimentResult {
    std::vector<CellOutcome> cells;
    std::vector<EnsembleColumn> ensembles;
    std::vector<std::string> errors;  // failures outside the grid cells

    bool all_ok() const;
    /// 0 when everything ran, 1 when some cell or ensemble failed.
    int exit_code() const { return all_ok() ? 0 : 1; }
};

/// Runs the organ x model grid. A failing cell is logged and skipped; the
/// remaining cells and the reports still get written.
ExperimentResult run_experiment(const ExperimentPlan& plan, std::ostream& log);

}  // namespace oarseg::nn
