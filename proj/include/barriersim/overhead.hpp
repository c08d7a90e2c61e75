#pragma once

#include "barriersim/distributions.hpp"
#include "barriersim/rng.hpp"

namespace barriersim {

/// Blocking overhead from a polling scheduler: a queued barrier job waits for
/// the next global resource offer, which comes either from the periodic revive
/// timer (uniform phase over the polling interval) or from the next job
/// arrival (exponential), whichever is first:
///
///     Y = min(Unif(0, P), Exp(lambda)),  P(Y > y) = (P - y)/P * exp(-lambda y) on [0, P].
///
/// Times are in seconds; the default interval is 1000 ms.
class RevivePollingModel {
public:
    static constexpr Time kDefaultInterval = 1.0;

    explicit RevivePollingModel(Time interval = kDefaultInterval, double arrival_rate = 0.0);

    /// Convenience for callers that work in milliseconds.
    static RevivePollingModel from_millis(double interval_ms, double arrival_rate_per_s) {
        return RevivePollingModel(interval_ms / 1000.0, arrival_rate_per_s);
    }

    Time interval() const noexcept { return interval_; }
    double arrival_rate() const noexcept { return arrival_rate_; }

    /// Closed-form mean, i.e. the integral of the CCDF over [0, P].
    Time mean() const;

private:
    Time interval_;
    double arrival_rate_;
};

double overhead_ccdf(Time y, const RevivePollingModel& model);
double overhead_cdf(Time y, const RevivePollingModel& model);
/// Density (1/P) e^{-lambda y} (1 + lambda (P - y)) on [0, P], zero outside.
double overhead_pdf(Time y, const RevivePollingModel& model);
/// Minimum of an independent Unif(0, P) and Exp(lambda) draw.
Time sample_overhead(const RevivePollingModel& model, RngStream& rng);

}  // namespace barriersim
