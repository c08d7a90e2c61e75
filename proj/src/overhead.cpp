#include "barriersim/overhead.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace barriersim {

RevivePollingModel::RevivePollingModel(Time interval, double arrival_rate)
    : interval_(interval), arrival_rate_(arrival_rate) {
    if (!(std::isfinite(interval) && interval > 0.0)) throw std::invalid_argument("polling interval must be > 0");
    if (!(std::isfinite(arrival_rate) && arrival_rate >= 0.0))
        throw std::invalid_argument("overhead arrival rate must be >= 0");
}

Time RevivePollingModel::mean() const {
    const double p = interval_;
    const double lam = arrival_rate_;
    if (lam * p < 1e-8) return p / 2.0 - lam * p * p / 6.0;
    // (1/lam) * (1 - (1 - e^{-lam P}) / (lam P))
    return (1.0 + std::expm1(-lam * p) / (lam * p)) / lam;
}

double overhead_ccdf(Time y, const RevivePollingModel& model) {
    const double p = model.interval();
    if (y <= 0.0) return 1.0;
    if (y >= p) return 0.0;
    return (p - y) / p * std::exp(-model.arrival_rate() * y);
}

double overhead_cdf(Time y, const RevivePollingModel& model) { return 1.0 - overhead_ccdf(y, model); }

double overhead_pdf(Time y, const RevivePollingModel& model) {
    const double p = model.interval();
    if (y < 0.0 || y > p) return 0.0;
    const double lam = model.arrival_rate();
    return std::exp(-lam * y) * (1.0 + lam * (p - y)) / p;
}

Time sample_overhead(const RevivePollingModel& model, RngStream& rng) {
    const Time timer = rng.uniform() * model.interval();
    if (model.arrival_rate() == 0.0) return timer;
    return std::min(timer, rng.exponential(model.arrival_rate()));
}

}  // namespace barriersim
