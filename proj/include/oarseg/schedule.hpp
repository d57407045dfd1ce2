#pragma once

namespace oarseg {

struct PlateauConfig {
    double lr0 = 1e-5;
    double factor = 0.2;
    int lr_patience = 10;
    int stop_patience = 14;
    /// A validation loss counts as an improvement when it undercuts the best
    /// so far by more than this fraction of the best.
    double threshold = 1e-4;
};

struct PlateauDecision {
    bool improved = false;
    bool lr_dropped = false;
    bool stop = false;
};

/// Plateau learning-rate decay and early stopping driven by one validation
/// loss per epoch. The learning rate drops once `lr_patience` consecutive
/// epochs pass without improvement (the counter restarts after each drop);
/// training stops once `stop_patience` epochs pass without improvement.
class PlateauTracker {
public:
    explicit PlateauTracker(PlateauConfig config);

    PlateauDecision observe(double val_loss);

    double lr() const { return lr_; }
    int drops() const { return drops_; }
    int epoch() const { return epoch_; }
    double best() const { return best_; }
    int best_epoch() const { return best_epoch_; }
    int epochs_since_improvement() const { return since_improvement_; }
    const PlateauConfig& config() const { return config_; }

private:
    PlateauConfig config_;
    double lr_;
    double best_;
    int drops_ = 0;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int since_improvement_ = 0;
    int since_lr_change_ = 0;
};

}  // namespace oarseg
