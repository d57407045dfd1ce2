// oarseg: train, evaluate and fuse per-organ thoracic segmentation models.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <regex>
#include <string>

#include <CLI11.hpp>

#include "oarseg/config.hpp"
#include "oarseg/experiment.hpp"
#include "oarseg/fusion.hpp"
#include "oarseg/report.hpp"

namespace fs = std::filesystem;
using namespace oarseg;
using namespace oarseg::nn;

namespace {

// Usage and configuration problems; everything else exits with 1.
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Shape3 parse_shape(const std::string& text) {
    static const std::regex re(R"((\d+)x(\d+)x(\d+))");
    std::smatch m;
    if (!std::regex_match(text, m, re)) throw UsageError("--shape must look like 16x64x64");
    return {std::stoll(m[1]), std::stoll(m[2]), std::stoll(m[3])};
}

std::vector<const PatientVolumes*> test_patients(const std::vector<PatientVolumes>& dataset,
                                                 const std::optional<DatasetSplit>& split) {
    if (split && !split->test_ids.empty()) return select_patients(dataset, split->test_ids);
    std::cerr << "warning: checkpoint has no split; evaluating on every patient\n";
    std::vector<const PatientVolumes*> all;
    for (const auto& p : dataset) all.push_back(&p);
    return all;
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") std::cout << text;
    else write_text(out, text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Per-organ thoracic CT segmentation with adversarial training"};
    app.require_subcommand(1);

    // phantom
    auto* phantom = app.add_subcommand("phantom", "Write a synthetic thoracic CT dataset");
    std::string phantom_out, phantom_shape = "16x64x64";
    PhantomOptions phantom_opts;
    phantom->add_option("--out", phantom_out, "Output directory")->required();
    phantom->add_option("--patients", phantom_opts.n_patients, "Number of patients")->capture_default_str();
    phantom->add_option("--seed", phantom_opts.seed, "Generator seed")->capture_default_str();
    phantom->add_option("--shape", phantom_shape, "Volume size SxHxW")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Train one model for one organ");
    std::string train_config, train_organ, train_model, train_data, train_out;
    std::uint64_t train_split_seed = 0;
    std::optional<int> train_epochs;
    std::optional<std::uint64_t> train_seed;
    train->add_option("--config", train_config, "Run config (TOML)");
    train->add_option("--organ", train_organ, "Target organ")->required();
    train->add_option("--model", train_model, "unet, se-resunet, gan-prod, gan-early or gan-late")->required();
    train->add_option("--data", train_data, "Dataset directory")->required();
    train->add_option("--out", train_out, "Run directory")->required();
    train->add_option("--split-seed", train_split_seed, "Patient split seed")->capture_default_str();
    train->add_option("--max-epochs", train_epochs, "Override max_epochs");
    train->add_option("--seed", train_seed, "Override the initialization seed");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on its test patients");
    std::string eval_ckpt, eval_data, eval_organ, eval_out, eval_format = "csv";
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint directory")->required();
    eval->add_option("--data", eval_data, "Dataset directory")->required();
    eval->add_option("--organ", eval_organ, "Target organ (defaults to the checkpoint's)");
    eval->add_option("--out", eval_out, "Report file, '-' for stdout")->capture_default_str();
    eval->add_option("--format", eval_format, "csv or md")->check(CLI::IsMember({"csv", "md"}));

    // ensemble
    auto* ensemble = app.add_subcommand("ensemble", "Fuse six organ models into one label map");
    std::string ens_members, ens_data, ens_out;
    ensemble->add_option("--members", ens_members, "Ensemble manifest (JSON)")->required();
    ensemble->add_option("--data", ens_data, "Dataset directory")->required();
    ensemble->add_option("--out", ens_out, "Report CSV; a markdown copy goes next to it")->required();

    // run
    auto* run = app.add_subcommand("run", "Run an experiment plan");
    std::string run_plan;
    run->add_option("--plan", run_plan, "Experiment plan (TOML)")->required();

    // report
    auto* report = app.add_subcommand("report", "Render a report CSV");
    std::string report_in, report_out, report_format = "md";
    report->add_option("--in", report_in, "Run directory or report.csv")->required();
    report->add_option("--format", report_format, "csv or md")->check(CLI::IsMember({"csv", "md"}))->capture_default_str();
    report->add_option("--out", report_out, "Output file, '-' for stdout");

    // overlay
    auto* overlay = app.add_subcommand("overlay", "Render prediction vs ground truth for one slice");
    std::string ov_ckpt, ov_data, ov_patient, ov_out;
    std::int64_t ov_slice = 0;
    overlay->add_option("--checkpoint", ov_ckpt, "Checkpoint directory")->required();
    overlay->add_option("--data", ov_data, "Dataset directory (defaults to the one recorded at training)");
    overlay->add_option("--patient", ov_patient, "Patient id")->required();
    overlay->add_option("--slice", ov_slice, "Slice index")->required();
    overlay->add_option("--out", ov_out, "PNG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*phantom) {
            phantom_opts.shape = parse_shape(phantom_shape);
            const auto dirs = synthesize_phantom(phantom_out, phantom_opts);
            std::cout << "wrote " << dirs.size() << " patients to " << phantom_out << '\n';
        } else if (*train) {
            const auto spec = parse_model(train_model);
            const auto organ = parse_organ(train_organ);
            TrainConfig config = train_config.empty() ? TrainConfig{} : load_train_config(train_config);
            if (train_epochs) config.max_epochs = *train_epochs;
            if (train_seed) config.seed = *train_seed;
            const auto dataset = load_dataset(train_data);
            std::vector<std::string> ids;
            for (const auto& p : dataset) ids.push_back(p.image.patient_id);
            const auto split = split_dataset(ids, train_split_seed);
            auto cell = train_cell(spec, organ, dataset, split, config, train_out, &std::cerr, train_data);
            const auto row = evaluate_model(*cell.model, select_patients(dataset, split.test_ids), organ, spec.name,
                                            config.window, config.batch_size);
            write_text(fs::path(train_out) / "report.csv", report_csv({row}));
            std::cout << organ_name(organ) << ' ' << spec.name << " best epoch " << cell.meta.epoch << " val_dsc "
                      << format_score(cell.meta.val_dsc) << " test DSC " << format_cell(row.dsc) << " HD95 "
                      << format_cell(row.hd95) << '\n';
        } else if (*eval) {
            const auto loaded = load_segmenter(eval_ckpt);
            const auto organ = parse_organ(eval_organ.empty() ? loaded.meta.organ : eval_organ);
            if (organ_name(organ) != loaded.meta.organ)
                std::cerr << "warning: checkpoint was trained for " << loaded.meta.organ << '\n';
            const auto dataset = load_dataset(eval_data);
            const auto row = evaluate_model(*loaded.model, test_patients(dataset, loaded.meta.split), organ,
                                            loaded.meta.architecture, loaded.meta.window);
            const auto table = render_table({row});
            emit(eval_format == "csv" ? table.csv : table.markdown, eval_out);
        } else if (*ensemble) {
            const auto manifest = read_ensemble_manifest(ens_members);
            const auto loaded = load_ensemble(manifest);
            const auto dataset = load_dataset(ens_data);
            const auto result = evaluate_ensemble(loaded.members, test_patients(dataset, loaded.split), loaded.window);
            const auto table = render_ensemble_table({make_ensemble_column(manifest.name + " fused", result.fused.dsc),
                                                      make_ensemble_column(manifest.name + " binary", result.binary_dsc)});
            const fs::path csv_path(ens_out);
            if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
            write_text(csv_path, table.csv);
            write_text(fs::path(csv_path).replace_extension(".md"), table.markdown);
            std::cout << table.markdown;
        } else if (*run) {
            const auto plan = load_plan(run_plan);
            const auto result = run_experiment(plan, std::cerr);
            for (const auto& c : result.cells)
                if (!c.ok) std::cerr << "failed: " << organ_name(c.organ) << '/' << c.model << ": " << c.error << '\n';
            for (const auto& e : result.errors) std::cerr << "failed: " << e << '\n';
            std::cout << "reports written to " << plan.out.string() << '\n';
            return result.exit_code();
        } else if (*report) {
            fs::path in(report_in);
            if (fs::is_directory(in)) in /= "report.csv";
            const auto rows = read_report_csv(in);
            const auto table = render_table(rows);
            emit(report_format == "csv" ? table.csv : table.markdown, report_out);
        } else if (*overlay) {
            const auto loaded = load_segmenter(ov_ckpt);
            if (ov_data.empty()) ov_data = loaded.meta.data;
            if (ov_data.empty()) throw UsageError("checkpoint records no dataset; pass --data");
            const auto dataset = load_dataset(ov_data);
            const auto patients = select_patients(dataset, {ov_patient});
            write_slice_overlay(*loaded.model, *patients.front(), parse_organ(loaded.meta.organ), ov_slice,
                                loaded.meta.window, ov_out);
            std::cout << "wrote " << ov_out << '\n';
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
