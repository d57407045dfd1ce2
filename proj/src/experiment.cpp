#include "oarseg/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <json.hpp>

#include "oarseg/fusion.hpp"
#include "oarseg/overlay.hpp"

namespace oarseg::nn {

namespace fs = std::filesystem;

std::vector<const PatientVolumes*> select_patients(const std::vector<PatientVolumes>& dataset,
                                                   const std::vector<std::string>& ids) {
    std::vector<const PatientVolumes*> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = std::find_if(dataset.begin(), dataset.end(),
                               [&](const PatientVolumes& p) { return p.image.patient_id == id; });
        if (it == dataset.end()) throw std::invalid_argument("patient '" + id + "' not found in the dataset");
        out.push_back(&*it);
    }
    return out;
}

TrainConfig config_for_model(const ModelSpec& spec, TrainConfig base) {
    if (spec.adversarial()) {
        base.mode = TrainMode::adversarial;
        base.discriminator = spec.discriminator;
    } else {
        base.mode = TrainMode::supervised;
        base.discriminator.reset();
    }
    return base;
}

TrainedCell train_cell(const ModelSpec& spec, OrganId organ, const std::vector<PatientVolumes>& dataset,
                       const DatasetSplit& split, TrainConfig config, const fs::path& dir, std::ostream* log,
                       const fs::path& data_dir) {
    config = config_for_model(spec, std::move(config));
    config.validate();
    const auto dtype = parse_dtype(config.dtype);

    Segmenter generator = spec.family == ModelFamily::se_resunet
                              ? build_baseline(spec.name, config.generator, config.seed)
                              : build_generator(config.generator, config.seed);
    generator->to(dtype);
    Critic critic;
    if (spec.adversarial()) {
        critic = build_discriminator(*spec.discriminator, config.critic, config.seed + 1);
        critic->to(dtype);
    }

    const auto train = make_slice_dataset(select_patients(dataset, split.train_ids), organ, config.window, dtype,
                                          config.roi_only);
    const auto val = make_slice_dataset(select_patients(dataset, split.val_ids), organ, config.window, dtype);

    TrainingSession session(generator, critic, config);
    const auto started = std::chrono::steady_clock::now();
    auto result = fit(session, train, val, [&](const EpochRecord& r, const RunState&) {
        if (!log) return;
        *log << "  " << organ_name(organ) << '/' << spec.name << " epoch " << r.epoch << " lr " << r.lr
             << " bce " << r.train_bce << " val_loss " << r.val_loss << " val_dsc " << r.val_dsc << '\n';
    });
    if (log) {
        const std::chrono::duration<double> took = std::chrono::steady_clock::now() - started;
        *log << "  " << organ_name(organ) << '/' << spec.name << " finished after " << result.state.epoch
             << " epochs in " << took.count() << " s\n";
    }

    restore_parameters(*generator, result.best);
    generator->eval();

    CheckpointMeta meta;
    meta.architecture = spec.name;
    meta.organ = std::string(organ_name(organ));
    meta.generator = config.generator;
    meta.seed = config.seed;
    meta.epoch = result.state.best_epoch;
    meta.val_loss = result.state.best_val_loss;
    meta.val_dsc = result.state.best_val_dsc;
    meta.dtype = config.dtype;
    meta.window = config.window;
    meta.split = split;
    if (!data_dir.empty()) meta.data = fs::absolute(data_dir).lexically_normal().string();

    fs::create_directories(dir);
    save_checkpoint(dir / "checkpoint", result.best, meta);
    write_history_csv(dir / "history.csv", result.state.history);
    return {meta, generator, std::move(result.state)};
}

void write_slice_overlay(SegmenterImpl& model, const PatientVolumes& patient, OrganId organ, std::int64_t slice,
                         HuWindow window, const fs::path& path) {
    const auto& shape = patient.image.shape;
    if (slice < 0 || slice >= shape.slices)
        throw std::out_of_range("slice " + std::to_string(slice) + " outside [0, " + std::to_string(shape.slices) +
                                ")");
    const auto logits = volume_logits(model, patient.image, window);
    const auto pred = threshold_logits(patient.image.patient_id, logits);
    const auto gt = organ_mask(patient.labels, slice, organ);
    const auto image = normalize_slice(hu_slice(patient.image, slice), window);
    write_png(path, render_overlay(image, pred.slice(slice), gt));
}

void write_ensemble_manifest(const fs::path& path, const EnsembleManifest& manifest) {
    nlohmann::json j;
    j["name"] = manifest.name;
    auto& members = j["members"];
    members = nlohmann::json::object();
    for (const auto& [organ, dir] : manifest.members) members[std::string(organ_name(organ))] = dir.string();
    write_text(path, j.dump(2) + "\n");
}

EnsembleManifest read_ensemble_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    EnsembleManifest manifest;
    manifest.name = j.value("name", std::string("ensemble"));
    if (!j.contains("members") || !j["members"].is_object())
        throw std::runtime_error(path.string() + ": missing 'members' object");
    for (const auto& [key, value] : j["members"].items()) {
        const auto organ = parse_organ(key);
        fs::path dir = value.get<std::string>();
        if (dir.is_relative()) dir = path.parent_path() / dir;
        manifest.members[organ] = dir;
    }
    for (auto organ : kAllOrgans)
        if (!manifest.members.count(organ))
            throw std::runtime_error(path.string() + ": no member for " + std::string(organ_name(organ)));
    return manifest;
}

LoadedEnsemble load_ensemble(const EnsembleManifest& manifest) {
    LoadedEnsemble out;
    bool first = true;
    for (const auto& [organ, dir] : manifest.members) {
        auto loaded = load_segmenter(dir);
        if (loaded.meta.organ != organ_name(organ))
            throw std::runtime_error(dir.string() + " was trained for " + loaded.meta.organ + ", not " +
                                     std::string(organ_name(organ)));
        if (first) {
            out.window = loaded.meta.window;
            out.split = loaded.meta.split;
            first = false;
        } else if (loaded.meta.window.lo != out.window.lo || loaded.meta.window.hi != out.window.hi) {
            throw std::runtime_error("ensemble members use different HU windows");
        }
        out.members[organ] = loaded.model;
    }
    return out;
}

bool ExperimentResult::all_ok() const {
    return errors.empty() && std::all_of(cells.begin(), cells.end(), [](const CellOutcome& c) { return c.ok; });
}

namespace {

void write_reports(const fs::path& dir, const std::string& stem, const RenderedTable& table,
                   const std::vector<std::string>& formats) {
    for (const auto& f : formats) {
        if (f == "csv") write_text(dir / (stem + ".csv"), table.csv);
        if (f == "md") write_text(dir / (stem + ".md"), table.markdown);
    }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentPlan& plan, std::ostream& log) {
    plan.validate();
    ExperimentResult result;

    const auto dataset = load_dataset(plan.data);
    std::vector<std::string> ids;
    for (const auto& p : dataset) ids.push_back(p.image.patient_id);
    const auto split = split_dataset(ids, plan.split_seed);
    const auto test = select_patients(dataset, split.test_ids);
    log << "dataset: " << dataset.size() << " patients, split " << split.train_ids.size() << '/'
        << split.val_ids.size() << '/' << split.test_ids.size() << '\n';

    fs::create_directories(plan.out);
    std::vector<MetricRow> rows;
    std::vector<EnsembleCandidate> gan_candidates, cnn_candidates;

    for (auto organ : plan.organs) {
        for (const auto& name : plan.models) {
            CellOutcome cell;
            cell.organ = organ;
            const auto spec = parse_model(name);
            cell.model = spec.name;
            const auto dir = plan.out / organ_name(organ) / spec.name;
            log << "cell " << organ_name(organ) << '/' << spec.name << '\n';
            try {
                auto trained = train_cell(spec, organ, dataset, split, plan.train, dir, &log, plan.data);
                auto row = evaluate_model(*trained.model, test, organ, spec.name, plan.train.window,
                                          plan.train.batch_size);
                write_text(dir / "report.csv", report_csv({row}));
                for (int s : plan.overlay_slices)
                    write_slice_overlay(*trained.model, *test.front(), organ, s, plan.train.window,
                                        dir / ("overlay_" + test.front()->image.patient_id + "_" +
                                               std::to_string(s) + ".png"));
                cell.ok = true;
                cell.row = row;
                cell.val_dsc = trained.meta.val_dsc;
                cell.checkpoint = dir / "checkpoint";
                rows.push_back(row);
                EnsembleCandidate cand{spec.name, organ, cell.val_dsc, cell.checkpoint.string()};
                (spec.adversarial() ? gan_candidates : cnn_candidates).push_back(cand);
            } catch (const std::exception& e) {
                cell.error = e.what();
                log << "  failed: " << e.what() << '\n';
            }
            result.cells.push_back(std::move(cell));
        }
    }

    if (rows.empty())
        result.errors.push_back("no cell produced a result; report not written");
    else
        write_reports(plan.out, "report", render_table(rows), plan.formats);

    if (plan.ensemble) {
        const std::pair<std::string, const std::vector<EnsembleCandidate>*> groups[] = {
            {"GAN", &gan_candidates}, {"CNN", &cnn_candidates}};
        for (const auto& [label, candidates] : groups) {
            if (candidates->empty()) continue;
            try {
                const auto chosen = select_ensemble_members(*candidates);
                EnsembleManifest manifest{label, {}};
                for (const auto& [organ, cand] : chosen) {
                    manifest.members[organ] = cand.checkpoint;
                    log << "ensemble " << label << ": " << organ_name(organ) << " <- " << cand.model << '\n';
                }
                write_ensemble_manifest(plan.out / ("ensemble_" + label + ".json"), manifest);
                const auto loaded = load_ensemble(manifest);
                const auto eval = evaluate_ensemble(loaded.members, test, loaded.window, plan.train.batch_size);
                result.ensembles.push_back(make_ensemble_column(label, eval.fused.dsc));
            } catch (const std::exception& e) {
                result.errors.push_back("ensemble " + label + ": " + e.what());
                log << "ensemble " << label << " failed: " << e.what() << '\n';
            }
        }
        if (!result.ensembles.empty())
            write_reports(plan.out, "ensemble", render_ensemble_table(result.ensembles), plan.formats);
    }
    return result;
}

}  // namespace oarseg::nn
