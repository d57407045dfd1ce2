// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.
//
// Usage: acceptance [work-dir]   (defaults to a fresh directory under the system temp dir)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oarseg/adversarial.hpp"
#include "oarseg/evaluation.hpp"
#include "oarseg/experiment.hpp"
#include "oarseg/fusion.hpp"
#include "oarseg/metrics.hpp"
#include "oarseg/overlay.hpp"
#include "oarseg/report.hpp"
#include "oarseg/schedule.hpp"
#include "oarseg/trainer.hpp"

#include "../gradcheck.hpp"
#include "../oracles.hpp"

using namespace oarseg;
using namespace oarseg::nn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

const DiscriminatorKind kKinds[] = {DiscriminatorKind::product, DiscriminatorKind::early_fusion,
                                    DiscriminatorKind::late_fusion};

/// 50 phantom patients at 16x64x64, split 40/5/5, plus the models trained on them.
struct PhantomStudy {
    fs::path root;
    std::vector<PatientVolumes> data;
    DatasetSplit split;
    std::vector<const PatientVolumes*> test;
    std::map<std::string, TrainedCell> cells;  // "<organ>/<model>"

    explicit PhantomStudy(fs::path dir) : root(std::move(dir)) {
        data = generate_phantom({2024, 50, {16, 64, 64}, {2.5, 1.0, 1.0}});
        std::vector<std::string> ids;
        for (const auto& p : data) ids.push_back(p.image.patient_id);
        split = split_dataset(ids, 0);
        test = select_patients(data, split.test_ids);
    }

    static TrainConfig config() {
        TrainConfig c;
        c.lr0 = 1e-3;
        c.max_epochs = 15;
        c.seed = 7;
        return c;
    }

    TrainedCell& train(OrganId organ, const std::string& model) {
        const auto key = std::string(organ_name(organ)) + "/" + model;
        if (auto it = cells.find(key); it != cells.end()) return it->second;
        const auto spec = parse_model(model);
        auto cfg = config_for_model(spec, config());
        // Without a Lipschitz constraint the critic gap grows without bound on the phantom.
        if (spec.adversarial()) cfg.weight_clip = 0.01;
        auto cell = train_cell(spec, organ, data, split, cfg, root / key);
        return cells.emplace(key, std::move(cell)).first->second;
    }
};

Outcome metric_oracle() {
    std::mt19937_64 rng(620);
    int dsc_mismatch = 0, hd_mismatch = 0, defined = 0;
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const auto a = oracle::random_mask(rng, 32, 32), b = oracle::random_mask(rng, 32, 32);
        const BinaryMaskVolume va{"p", {1, 32, 32}, a.data}, vb{"p", {1, 32, 32}, b.data};
        if (dsc_volume(va, vb) != oracle::dice(a.data, b.data)) ++dsc_mismatch;
        const auto got = hd95_slice(a, b);
        const double want = oracle::hd95(a, b);
        if (std::isnan(want) != !got.defined()) {
            ++hd_mismatch;
            continue;
        }
        if (std::isnan(want)) continue;
        ++defined;
        const double err = std::abs(got.value - want);
        worst = std::max(worst, err);
        if (err > 1e-9) ++hd_mismatch;
    }
    return {dsc_mismatch == 0 && hd_mismatch == 0,
            "200 pairs, " + std::to_string(defined) + " with defined HD95; dsc mismatches " +
                std::to_string(dsc_mismatch) + ", hd95 mismatches " + std::to_string(hd_mismatch) +
                ", max |hd95 - oracle| " + fmt("%.3g", worst)};
}

Outcome gradient_fidelity() {
    GeneratorConfig g;
    g.depth = 2;
    g.base_channels = 4;
    const DiscriminatorConfig d{{4, 4, 8, 8}, 0.2};
    bool pass = true;
    std::string detail;
    for (auto kind : kKinds) {
        auto gen = build_generator(g, 41);
        auto critic = build_discriminator(kind, d, 42);
        gen->to(torch::kFloat64);
        critic->to(torch::kFloat64);
        std::int64_t critic_params = 0;
        for (const auto& p : critic->parameters()) critic_params += p.numel();
        torch::manual_seed(43);
        const auto image = torch::rand({2, 1, 16, 16}, torch::kFloat64);
        const auto gt = (torch::rand({2, 1, 16, 16}, torch::kFloat64) > 0.5).to(torch::kFloat64);
        const auto r = check_generator_gradients(*gen, *critic, kind, image, gt, 100, 44, 1e-4);
        const auto total = r.parameters + critic_params;
        pass = pass && total <= 10000 && r.accepted >= 100 && r.max_rel < 1e-3;
        detail += std::string(detail.empty() ? "" : "; ") + std::string(kind_name(kind)) + ": " +
                  std::to_string(total) + " params, " + std::to_string(r.accepted) + " probes, max rel " +
                  fmt("%.2e", r.max_rel) + ", " + std::to_string(r.straddled) + " kink probes redrawn";
    }
    return {pass, detail};
}

Outcome loss_invariants() {
    std::mt19937_64 rng(622);
    std::normal_distribution<double> N(0.0, 3.0);
    std::uniform_int_distribution<int> len(1, 32);
    int violations = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> f(len(rng)), r(f.size());
        for (auto& v : f) v = N(rng);
        for (auto& v : r) v = N(rng);
        const double d = critic_objective(f, r);
        if (!(d >= 0.0) || d != critic_objective(r, f)) ++violations;
    }
    int nonzero = 0;
    torch::manual_seed(622);
    for (auto kind : kKinds) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            auto critic = build_discriminator(kind, DiscriminatorConfig::test_scale(), seed);
            critic->to(torch::kFloat64);
            const auto image = torch::rand({4, 1, 32, 32}, torch::kFloat64);
            const auto gt = (torch::rand({4, 1, 32, 32}, torch::kFloat64) > 0.5).to(torch::kFloat64);
            const auto loss = composite_generator_loss(image, saturated_logits(gt), gt, kind, *critic);
            if (loss.adversarial != 0.0) ++nonzero;
        }
    }
    return {violations == 0 && nonzero == 0, "1000 score batches, " + std::to_string(violations) +
                                                 " symmetry/sign violations; nonzero adversarial terms at GT: " +
                                                 std::to_string(nonzero) + " of 9"};
}

Outcome scheduler_semantics() {
    struct Case {
        std::string name;
        std::vector<double> losses;
        int drop, stop;
    };
    std::vector<double> plateau{1.0, 0.9};
    plateau.resize(16, 0.9);
    const Case cases[] = {{"constant", std::vector<double>(40, 0.7), 11, 15}, {"improve-then-flat", plateau, 12, 16}};
    bool pass = true;
    std::string detail;
    for (const auto& c : cases) {
        PlateauTracker t(PlateauConfig{});
        int drop = 0, stop = 0;
        double lr_after_drop = 0.0;
        for (double v : c.losses) {
            const auto d = t.observe(v);
            if (d.lr_dropped && drop == 0) {
                drop = t.epoch();
                lr_after_drop = t.lr();
            }
            if (d.stop) {
                stop = t.epoch();
                break;
            }
        }
        pass = pass && drop == c.drop && stop == c.stop && lr_after_drop == PlateauConfig{}.lr0 * 0.2;
        detail += (detail.empty() ? "" : "; ") + c.name + ": drop " + std::to_string(drop) + " (want " +
                  std::to_string(c.drop) + "), stop " + std::to_string(stop) + " (want " + std::to_string(c.stop) +
                  ")";
    }
    return {pass, detail};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const fs::path& dir) {
    const auto data = generate_phantom({5, 6, {16, 32, 32}, {2.5, 1.0, 1.0}});
    std::vector<std::string> ids;
    for (const auto& p : data) ids.push_back(p.image.patient_id);
    const auto split = split_dataset(ids, 0);
    TrainConfig base;
    base.lr0 = 1e-3;
    base.max_epochs = 3;
    base.seed = 11;
    base.dtype = "float64";
    bool pass = true;
    std::string detail;
    for (const char* name : {"unet", "gan-late"}) {
        const auto spec = parse_model(name);
        auto cfg = config_for_model(spec, base);
        if (spec.adversarial()) cfg.weight_clip = 0.01;
        train_cell(spec, OrganId::heart, data, split, cfg, dir / name / "a");
        train_cell(spec, OrganId::heart, data, split, cfg, dir / name / "b");
        const auto ha = read_history_csv(dir / name / "a" / "history.csv");
        const auto hb = read_history_csv(dir / name / "b" / "history.csv");
        double worst = ha.size() == hb.size() ? 0.0 : INFINITY;
        for (std::size_t i = 0; i < std::min(ha.size(), hb.size()); ++i) {
            const auto& x = ha[i];
            const auto& y = hb[i];
            for (double diff : {x.lr - y.lr, x.train_bce - y.train_bce, x.train_adv - y.train_adv,
                                x.d_objective - y.d_objective, x.val_loss - y.val_loss, x.val_dsc - y.val_dsc})
                worst = std::max(worst, std::abs(diff));
        }
        int files = 0, differing = 0;
        for (const auto& e : fs::directory_iterator(dir / name / "a" / "checkpoint")) {
            ++files;
            const auto other = dir / name / "b" / "checkpoint" / e.path().filename();
            if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
        }
        pass = pass && worst <= 1e-6 && files > 0 && differing == 0 && ha.size() == 3;
        detail += std::string(detail.empty() ? "" : "; ") + name + ": " + std::to_string(ha.size()) +
                  " epochs, max history diff " + fmt("%.3g", worst) + ", " + std::to_string(differing) + "/" +
                  std::to_string(files) + " checkpoint files differ";
    }
    return {pass, detail};
}

Outcome supervised_lung(PhantomStudy& study) {
    const auto& cell = study.train(OrganId::right_lung, "unet");
    double best = 0.0;
    int at = 0;
    for (const auto& r : cell.state.history)
        if (r.epoch <= 15 && r.val_dsc > best) best = r.val_dsc, at = r.epoch;
    return {best >= 0.85, "right lung, split " + std::to_string(study.split.train_ids.size()) + "/" +
                              std::to_string(study.split.val_ids.size()) + "/" +
                              std::to_string(study.split.test_ids.size()) + ", best val DSC " + fmt("%.4f", best) +
                              " at epoch " + std::to_string(at) + " of " +
                              std::to_string(cell.state.history.size())};
}

Outcome adversarial_heart(PhantomStudy& study) {
    auto test_dsc = [&](const std::string& model) {
        auto& cell = study.train(OrganId::heart, model);
        return evaluate_model(*cell.model, study.test, OrganId::heart, model, PhantomStudy::config().window).dsc.mean;
    };
    const double reference = test_dsc("unet");
    bool pass = true;
    std::string detail = "unet test DSC " + fmt("%.4f", reference);
    for (const char* model : {"gan-prod", "gan-early", "gan-late"}) {
        const double dsc = test_dsc(model);
        const auto& state = study.cells.at(std::string("heart/") + model).state;
        const double first = state.history.front().train_bce;
        double at_best = NAN;
        for (const auto& r : state.history)
            if (r.epoch == state.best_epoch) at_best = r.train_bce;
        const double drop = 1.0 - at_best / first;
        const bool ok = std::abs(dsc - reference) <= 0.05 && drop >= 0.5;
        pass = pass && ok;
        detail += std::string("; ") + model + " DSC " + fmt("%.4f", dsc) + ", BCE drop " + fmt("%.1f%%", 100 * drop) +
                  " (best epoch " + std::to_string(state.best_epoch) + ")";
    }
    return {pass, detail};
}

Outcome ensemble_consistency(PhantomStudy& study) {
    // Binary oracles: +4 inside the organ, -4 elsewhere.
    long organ_pixels = 0, wrong = 0;
    for (const auto* p : study.test) {
        const auto& s = p->labels.shape;
        std::array<torch::Tensor, kOrganCount> logits;
        for (auto organ : kAllOrgans) {
            std::vector<double> v(p->labels.labels.size());
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = p->labels.labels[i] == organ_code(organ) ? 4.0 : -4.0;
            logits[organ_index(organ)] = torch::tensor(v, torch::kFloat64).view({s.slices, s.height, s.width});
        }
        const auto fused = fuse_volume(p->image.patient_id, logits);
        for (std::size_t i = 0; i < fused.labels.size(); ++i) {
            if (p->labels.labels[i] == 0) continue;
            ++organ_pixels;
            wrong += fused.labels[i] != p->labels.labels[i];
        }
    }
    std::map<OrganId, Segmenter> members;
    for (auto organ : kAllOrgans) members[organ] = study.train(organ, "unet").model;
    const auto eval = evaluate_ensemble(members, study.test, PhantomStudy::config().window);
    double worst = 0.0;
    std::string per;
    for (auto organ : kAllOrgans) {
        const auto k = organ_index(organ);
        worst = std::max(worst, std::abs(eval.fused.dsc[k] - eval.binary_dsc[k]));
        per += std::string(per.empty() ? "" : ", ") + std::string(organ_name(organ)) + " " +
               fmt("%.4f", eval.binary_dsc[k]) + "->" + fmt("%.4f", eval.fused.dsc[k]);
    }
    return {wrong == 0 && organ_pixels > 0 && worst <= 0.02,
            "oracle fusion: " + std::to_string(wrong) + " of " + std::to_string(organ_pixels) +
                " organ pixels wrong; trained binary->fused DSC " + per + "; max gap " + fmt("%.4f", worst) +
                "; fused mean " + fmt("%.4f", eval.fused.mean)};
}

Outcome published_table() {
    const std::array<double, 6> gan{0.9698, 0.9736, 0.8488, 0.759, 0.9258, 0.8861};
    const std::array<double, 6> cnn{0.9669, 0.971, 0.7822, 0.7183, 0.9325, 0.8942};
    const auto g = make_ensemble_column("GAN", gan), c = make_ensemble_column("CNN", cnn);
    const auto table = render_ensemble_table({g, c});
    const bool printed = table.markdown.find(format_score(g.mean)) != std::string::npos &&
                         table.markdown.find(format_score(c.mean)) != std::string::npos;
    return {std::abs(g.mean - 0.8937) <= 5e-4 && std::abs(c.mean - 0.8775) <= 5e-4 && printed,
            "GAN mean " + fmt("%.5f", g.mean) + " (printed 0.8937), CNN mean " + fmt("%.5f", c.mean) +
                " (printed 0.8775)"};
}

Outcome overlay_partition() {
    std::mt19937_64 rng(627);
    long bad = 0, fg = 0;
    for (int t = 0; t < 50; ++t) {
        const auto p = oracle::random_mask(rng, 32, 32), g = oracle::random_mask(rng, 32, 32);
        const auto cls = classify_overlay(p, g);
        for (std::size_t i = 0; i < cls.data.size(); ++i) {
            const bool pi = p.data[i] != 0, gi = g.data[i] != 0;
            fg += pi || gi;
            const auto want = pi && gi   ? OverlayClass::overlap
                              : pi       ? OverlayClass::false_positive
                              : gi       ? OverlayClass::false_negative
                                         : OverlayClass::none;
            bad += cls.data[i] != want;
        }
    }
    return {bad == 0, "50 pairs, " + std::to_string(fg) + " foreground pixels, " + std::to_string(bad) +
                          " misclassified"};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1])
                                   : fs::temp_directory_path() / ("oarseg_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);
    PhantomStudy study(work / "phantom");

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"metric-oracle-equivalence", metric_oracle},
        {"gradient-fidelity", gradient_fidelity},
        {"loss-invariants", loss_invariants},
        {"scheduler-semantics", scheduler_semantics},
        {"determinism", [&] { return determinism(work / "determinism"); }},
        {"phantom-supervised", [&] { return supervised_lung(study); }},
        {"phantom-adversarial", [&] { return adversarial_heart(study); }},
        {"ensemble-consistency", [&] { return ensemble_consistency(study); }},
        {"published-table-arithmetic", published_table},
        {"overlay-partition", overlay_partition},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << " [" << fmt("%.1f", secs) << " s] " << o.detail
                  << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    std::error_code ec;
    fs::remove_all(work, ec);
    return failed == 0 ? 0 : 1;
}
