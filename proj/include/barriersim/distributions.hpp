#pragma once

#include <utility>
#include <variant>
#include <vector>

#include "barriersim/rng.hpp"

namespace barriersim {

using Time = double;  // seconds

struct ExponentialService {
    double rate;
};

struct HyperExponentialService {
    struct Branch {
        double prob;
        double rate;
    };
    std::vector<Branch> branches;
};

struct DeterministicService {
    Time value;
};

/// Task service-time distribution. Construction validates the parameters, so
/// every instance is samplable.
class TaskServiceDist {
public:
    using Variant = std::variant<ExponentialService, HyperExponentialService, DeterministicService>;

    static TaskServiceDist exponential(double rate);
    static TaskServiceDist hyper_exponential(std::vector<HyperExponentialService::Branch> branches);
    static TaskServiceDist deterministic(Time value);
    /// Two-branch mixture: rate `fast_rate` w.p. 1 - slow_prob, `fast_rate / slow_factor` otherwise.
    static TaskServiceDist bimodal(double fast_rate, double slow_prob, double slow_factor);

    const Variant& variant() const noexcept { return dist_; }
    bool is_exponential() const noexcept { return std::holds_alternative<ExponentialService>(dist_); }
    /// Rate of the exponential case; throws otherwise.
    double exponential_rate() const;

    Time mean() const;
    double second_moment() const;
    Time sample(RngStream& rng) const;

private:
    explicit TaskServiceDist(Variant v) : dist_(std::move(v)) {}
    Variant dist_;
};

inline Time sample_service(const TaskServiceDist& dist, RngStream& rng) { return dist.sample(rng); }

/// Probability mass function over the task count k of a job class.
class TaskCountPmf {
public:
    struct Entry {
        int k;
        double prob;
    };

    static TaskCountPmf fixed(int k);
    /// Entries must have distinct k >= 1 and probabilities summing to 1.
    static TaskCountPmf from_entries(std::vector<Entry> entries);

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    int max_k() const noexcept { return entries_.back().k; }
    int min_k() const noexcept { return entries_.front().k; }
    bool is_fixed() const noexcept { return entries_.size() == 1; }
    double mean() const;
    int sample(RngStream& rng) const;

private:
    explicit TaskCountPmf(std::vector<Entry> entries);
    std::vector<Entry> entries_;  // sorted by k, zero-probability entries dropped
    std::vector<double> cumulative_;
};

}  // namespace barriersim
