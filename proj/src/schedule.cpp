#include "oarseg/schedule.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace oarseg {

PlateauTracker::PlateauTracker(PlateauConfig config)
    : config_(config), lr_(config.lr0), best_(std::numeric_limits<double>::infinity()) {
    if (!(config.factor > 0.0 && config.factor < 1.0)) throw std::invalid_argument("lr factor must be in (0, 1)");
    if (config.lr_patience <= 0 || config.stop_patience <= 0) throw std::invalid_argument("patience must be positive");
    if (!(config.lr0 >= 0.0)) throw std::invalid_argument("initial learning rate must be non-negative");
}

PlateauDecision PlateauTracker::observe(double val_loss) {
    ++epoch_;
    PlateauDecision d;
    const bool first = std::isinf(best_);
    d.improved = std::isfinite(val_loss) && (first || val_loss < best_ - config_.threshold * std::abs(best_));
    if (d.improved) {
        best_ = val_loss;
        best_epoch_ = epoch_;
        since_improvement_ = 0;
        since_lr_change_ = 0;
    } else {
        ++since_improvement_;
        ++since_lr_change_;
    }
    if (since_lr_change_ >= config_.lr_patience) {
        ++drops_;
        lr_ = config_.lr0 * std::pow(config_.factor, drops_);
        since_lr_change_ = 0;
        d.lr_dropped = true;
    }
    d.stop = since_improvement_ >= config_.stop_patience;
    return d;
}

}  // namespace oarseg
