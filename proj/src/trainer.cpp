#include "oarseg/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "oarseg/adversarial.hpp"
#include "oarseg/report.hpp"
#include "oarseg/schedule.hpp"

namespace oarseg::nn {

void TrainConfig::validate() const {
    if (!(lr0 >= 0.0)) throw std::invalid_argument("lr0 must be non-negative");
    if (!(lr_factor > 0.0 && lr_factor < 1.0)) throw std::invalid_argument("lr_factor must be in (0, 1)");
    if (lr_patience <= 0) throw std::invalid_argument("lr_patience must be positive");
    if (stop_patience <= 0) throw std::invalid_argument("stop_patience must be positive");
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (max_epochs <= 0) throw std::invalid_argument("max_epochs must be positive");
    if (critic_steps <= 0) throw std::invalid_argument("critic_steps must be positive");
    if (mode == TrainMode::adversarial && !discriminator)
        throw std::invalid_argument("adversarial mode requires a discriminator kind");
    if (!(window.lo < window.hi)) throw std::invalid_argument("HU window requires lo < hi");
    parse_dtype(dtype);
    generator.validate();
    critic.validate();
}

TrainingSession::TrainingSession(Segmenter g, Critic c, TrainConfig cfg)
    : generator(std::move(g)), critic(std::move(c)), config(std::move(cfg)), lr(config.lr0) {
    config.validate();
    if (!generator) throw std::invalid_argument("training session needs a generator");
    if (config.mode == TrainMode::adversarial) {
        if (!critic) throw std::invalid_argument("adversarial training needs a critic");
        if (critic->kind() != *config.discriminator)
            throw std::invalid_argument("critic kind does not match the configured discriminator");
    }
}

SliceDataset make_slice_dataset(const std::vector<const PatientVolumes*>& patients, OrganId organ, HuWindow window,
                                torch::Dtype dtype, bool roi_only) {
    if (patients.empty()) throw std::invalid_argument("make_slice_dataset: no patients");
    SliceDataset data;
    std::vector<torch::Tensor> images, masks;
    std::int64_t offset = 0;
    for (const auto* pv : patients) {
        const auto slices = extract_slices(pv->image, pv->labels, organ, window);
        std::int64_t kept = 0;
        for (const auto& s : slices) {
            if (roi_only && std::all_of(s.mask.data.begin(), s.mask.data.end(), [](auto v) { return v == 0; }))
                continue;
            auto img = torch::from_blob(const_cast<double*>(s.image.data.data()), {1, 1, s.image.height, s.image.width},
                                        torch::kFloat64);
            std::vector<double> m(s.mask.data.begin(), s.mask.data.end());
            auto msk = torch::from_blob(m.data(), {1, 1, s.mask.height, s.mask.width}, torch::kFloat64);
            images.push_back(img.to(dtype, false, true));
            masks.push_back(msk.to(dtype, false, true));
            ++kept;
        }
        data.patient_ids.push_back(pv->image.patient_id);
        data.patient_offset.push_back(offset);
        data.patient_slices.push_back(kept);
        offset += kept;
    }
    if (images.empty()) throw std::invalid_argument("make_slice_dataset: no slices selected");
    data.images = torch::cat(images, 0);
    data.masks = torch::cat(masks, 0);
    return data;
}

std::vector<std::int64_t> epoch_order(std::int64_t n, std::uint64_t seed, int epoch) {
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(seed * 0x100000001b3ULL + static_cast<std::uint64_t>(epoch));
    for (std::int64_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    return order;
}

namespace {

template <typename Fn>
void for_each_batch(const SliceDataset& data, const std::vector<std::int64_t>& order, int batch_size, Fn&& fn) {
    const auto n = static_cast<std::int64_t>(order.size());
    for (std::int64_t start = 0; start < n; start += batch_size) {
        const auto end = std::min<std::int64_t>(n, start + batch_size);
        std::vector<std::int64_t> idx(order.begin() + start, order.begin() + end);
        auto index = torch::tensor(idx, torch::kLong);
        fn(data.images.index_select(0, index), data.masks.index_select(0, index));
    }
}

void require_finite(double value, const char* what, int epoch) {
    if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite " << what << " in epoch " << epoch << "; aborting epoch";
        throw std::runtime_error(msg.str());
    }
}

void require_data(const SliceDataset& data) {
    if (data.size() == 0) throw std::invalid_argument("training split is empty");
}

}  // namespace

EpochRecord train_epoch_supervised(TrainingSession& session, const SliceDataset& data, int epoch) {
    require_data(data);
    auto& gen = *session.generator;
    gen.train();
    const auto hyper = session.config.adam();
    double bce_sum = 0.0;
    for_each_batch(data, epoch_order(data.size(), session.config.seed, epoch), session.config.batch_size,
                   [&](const torch::Tensor& images, const torch::Tensor& masks) {
                       auto loss = bce_from_logits(gen.forward(images), masks);
                       const double value = loss.item<double>();
                       require_finite(value, "BCE", epoch);
                       gen.zero_grad();
                       loss.backward();
                       adam_step(gen, session.generator_state, hyper, session.lr);
                       bce_sum += value * static_cast<double>(images.size(0));
                   });
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = session.lr;
    rec.train_bce = bce_sum / static_cast<double>(data.size());
    return rec;
}

EpochRecord train_epoch_adversarial(TrainingSession& session, const SliceDataset& data, int epoch) {
    require_data(data);
    if (!session.critic) throw std::invalid_argument("adversarial epoch needs a critic");
    auto& gen = *session.generator;
    auto& critic = *session.critic;
    const auto kind = critic.kind();
    const auto& cfg = session.config;
    const auto hyper = cfg.adam();
    gen.train();
    critic.train();

    double bce_sum = 0.0, adv_sum = 0.0, d_sum = 0.0;
    for_each_batch(data, epoch_order(data.size(), cfg.seed, epoch), cfg.batch_size,
                   [&](const torch::Tensor& images, const torch::Tensor& masks) {
                       const auto n = static_cast<double>(images.size(0));
                       // (a) critic ascends |mean D(fake) - mean D(real)| on detached generator output.
                       double d_objective = 0.0;
                       for (int step = 0; step < cfg.critic_steps; ++step) {
                           torch::Tensor fake_logits;
                           {
                               torch::NoGradGuard guard;
                               fake_logits = gen.forward(images);
                           }
                           const auto pair = encode_pair(kind, images, fake_logits, masks);
                           auto objective = critic_gap(critic.forward(pair.fake), critic.forward(pair.real)).abs();
                           const double value = objective.item<double>();
                           require_finite(value, "critic objective", epoch);
                           if (step == 0) d_objective = value;
                           if (cfg.freeze_critic) break;
                           critic.zero_grad();
                           (-objective).backward();
                           adam_step(critic, session.critic_state, hyper, session.lr);
                           if (cfg.weight_clip > 0.0) clip_weights(critic, cfg.weight_clip);
                       }
                       // (b) generator descends BCE - weight * (mean D(fake) - mean D(real)).
                       auto terms = generator_loss_terms(images, gen.forward(images), masks, kind, critic,
                                                         cfg.adversarial_weight);
                       const double bce = terms.bce.item<double>();
                       const double adv = terms.adversarial.item<double>();
                       require_finite(bce, "BCE", epoch);
                       require_finite(adv, "adversarial term", epoch);
                       gen.zero_grad();
                       terms.total.backward();
                       adam_step(gen, session.generator_state, hyper, session.lr);
                       critic.zero_grad();

                       bce_sum += bce * n;
                       adv_sum += adv * n;
                       d_sum += d_objective * n;
                   });
    const auto total = static_cast<double>(data.size());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = session.lr;
    rec.train_bce = bce_sum / total;
    rec.train_adv = adv_sum / total;
    rec.d_objective = d_sum / total;
    return rec;
}

torch::Tensor predict_logits(SegmenterImpl& model, const torch::Tensor& images, int batch_size) {
    torch::NoGradGuard guard;
    model.eval();
    std::vector<torch::Tensor> parts;
    for (std::int64_t start = 0; start < images.size(0); start += batch_size) {
        const auto len = std::min<std::int64_t>(batch_size, images.size(0) - start);
        parts.push_back(model.forward(images.narrow(0, start, len)));
    }
    return torch::cat(parts, 0);
}

Validation validate(SegmenterImpl& model, const SliceDataset& data, int batch_size) {
    if (data.size() == 0) throw std::invalid_argument("validation split is empty");
    auto logits = predict_logits(model, data.images, batch_size);
    Validation v;
    {
        torch::NoGradGuard guard;
        v.loss = bce_loss(torch::sigmoid(logits), data.masks).item<double>();
    }
    auto pred = (logits >= 0).to(torch::kUInt8).contiguous();
    auto gt = (data.masks > 0.5).to(torch::kUInt8).contiguous();
    const auto pixels = data.height() * data.width();
    const auto* p = pred.data_ptr<std::uint8_t>();
    const auto* g = gt.data_ptr<std::uint8_t>();
    double dsc_sum = 0.0;
    for (std::size_t i = 0; i < data.patient_ids.size(); ++i) {
        const auto begin = data.patient_offset[i] * pixels;
        const auto count = static_cast<std::size_t>(data.patient_slices[i] * pixels);
        dsc_sum += dice({p + begin, count}, {g + begin, count});
    }
    v.dsc = dsc_sum / static_cast<double>(data.patient_ids.size());
    return v;
}

FitResult fit(TrainingSession& session, const SliceDataset& train, const SliceDataset& val,
              const EpochCallback& on_epoch) {
    require_data(train);
    if (val.size() == 0) throw std::invalid_argument("validation split is empty");
    const auto& cfg = session.config;
    PlateauTracker tracker({cfg.lr0, cfg.lr_factor, cfg.lr_patience, cfg.stop_patience, cfg.improvement_threshold});

    FitResult result;
    result.best = snapshot_parameters(*session.generator);
    auto& state = result.state;
    state.current_lr = cfg.lr0;
    state.best_val_loss = std::numeric_limits<double>::infinity();

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        session.lr = tracker.lr();
        auto rec = cfg.mode == TrainMode::adversarial ? train_epoch_adversarial(session, train, epoch)
                                                      : train_epoch_supervised(session, train, epoch);
        const auto v = validate(*session.generator, val, cfg.batch_size);
        rec.val_loss = v.loss;
        rec.val_dsc = v.dsc;
        const auto decision = tracker.observe(v.loss);
        if (decision.improved) {
            result.best = snapshot_parameters(*session.generator);
            state.best_val_dsc = v.dsc;
        }
        state.epoch = epoch;
        state.current_lr = tracker.lr();
        state.best_val_loss = tracker.best();
        state.best_epoch = tracker.best_epoch();
        state.epochs_since_improvement = tracker.epochs_since_improvement();
        state.lr_drops = tracker.drops();
        state.history.push_back(rec);
        if (on_epoch) on_epoch(rec, state);
        if (decision.stop) {
            state.stopped_early = true;
            break;
        }
    }
    session.lr = tracker.lr();
    if (state.best_epoch == 0) {
        state.never_improved = true;
        std::cerr << "warning: validation loss never improved; keeping the initial weights\n";
    }
    return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    out << "epoch,lr,train_bce,train_adv,d_objective,val_loss,val_dsc\n";
    for (const auto& r : history)
        out << r.epoch << ',' << format_exact(r.lr) << ',' << format_exact(r.train_bce) << ','
            << format_exact(r.train_adv) << ',' << format_exact(r.d_objective) << ',' << format_exact(r.val_loss)
            << ',' << format_exact(r.val_dsc) << '\n';
    write_text(path, out.str());
}

std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "epoch,lr,train_bce,train_adv,d_objective,val_loss,val_dsc")
        throw std::runtime_error("history.csv: unexpected header");
    std::vector<EpochRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string f;
        std::vector<std::string> parts;
        while (std::getline(fields, f, ',')) parts.push_back(f);
        if (parts.size() != 7) throw std::runtime_error("history.csv: expected 7 fields");
        EpochRecord r;
        r.epoch = std::stoi(parts[0]);
        double* targets[] = {&r.lr, &r.train_bce, &r.train_adv, &r.d_objective, &r.val_loss, &r.val_dsc};
        for (int i = 0; i < 6; ++i) *targets[i] = std::stod(parts[i + 1]);
        out.push_back(r);
    }
    return out;
}

}  // namespace oarseg::nn
