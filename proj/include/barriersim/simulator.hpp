#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "barriersim/model.hpp"
#include "barriersim/rng.hpp"

namespace barriersim {

/// Run length: either a number of arriving jobs or a simulated-time cutoff for
/// arrivals. In both cases the system is drained afterwards so every emitted
/// job is complete.
struct Horizon {
    enum class Kind { Jobs, Time };
    Kind kind = Kind::Jobs;
    std::uint64_t jobs = 0;
    Time time = 0.0;

    static Horizon job_count(std::uint64_t n) { return {Kind::Jobs, n, 0.0}; }
    static Horizon sim_time(Time t) { return {Kind::Time, 0, t}; }
};

/// Least-squares drift test on the queue length seen by arriving jobs.
struct DriftTestConfig {
    double slope_threshold = 1e-3;   ///< jobs per arriving job
    double final_queue_threshold = 100.0;
};

struct DriftReport {
    double slope = 0.0;
    double final_queue = 0.0;
    bool unstable = false;
};

/// Instantaneous view handed to an observer after each processed event.
struct SimSnapshot {
    Time now;
    int idle;
    int busy;
    int blocked;
    std::size_t queue_length;  ///< jobs not yet fully started
};

struct RunOptions {
    Horizon horizon = Horizon::job_count(100000);
    /// Jobs dropped from all statistics; defaults to 10% of the horizon.
    std::optional<std::uint64_t> warmup_jobs;
    bool keep_records = false;
    bool trace_idle_gaps = false;
    DriftTestConfig drift;
    std::function<void(const SimSnapshot&)> observer;
};

struct QueueSample {
    Time time;
    std::uint32_t length;
};

struct SimResult {
    std::uint64_t jobs_arrived = 0;
    std::uint64_t warmup_jobs = 0;
    std::vector<JobRecord> records;  ///< post-warmup, only when keep_records
    std::vector<Time> waiting;       ///< post-warmup W(n), in job order
    std::vector<Time> sojourn;       ///< post-warmup T(n), in job order
    std::vector<Time> idle_gaps;     ///< when trace_idle_gaps

    double total_server_time = 0.0;   ///< post-warmup jobs
    double useful_server_time = 0.0;  ///< post-warmup jobs
    double busy_fraction = 0.0;       ///< over the measurement window

    /// Whole-run accounting, used for conservation checks.
    std::vector<double> worker_busy_time;
    double all_jobs_server_time = 0.0;

    std::vector<std::uint32_t> queue_at_arrival;  ///< every arrival, in order
    std::vector<QueueSample> queue_series;        ///< decimated
    DriftReport drift;
    Time end_time = 0.0;

    std::size_t measured_jobs() const { return waiting.size(); }
    double mean_waiting() const;
    double mean_sojourn() const;
    double mean_total_server_time() const;
    double mean_useful_server_time() const;
};

/// Empirical p-quantile, p in (0, 1): the ceil(p n)-th order statistic.
double empirical_quantile(std::vector<double> samples, double p);

/// Simulates s workers with one FIFO job queue. Scheduling rules:
///  - head-of-line blocking: only the head job may start tasks;
///  - a barrier job starts all k tasks at once when k workers are idle;
///  - a non-barrier job seizes idle workers one task at a time;
///  - TwoBarrier: a finished task blocks its worker until the job departs;
///  - (s,k,l): the job departs at its l-th task completion and the remaining
///    running tasks are preempted;
///  - overhead per OverheadInjection.
/// Deterministic for a given root stream; all randomness comes from named
/// child streams of `rng`.
SimResult run(const SystemConfig& cfg, const WorkloadSpec& spec, const RunOptions& options, const RngStream& rng);

/// Least-squares slope over the second half of the samples plus the final
/// value, classified against the thresholds.
DriftReport drift_test(const std::vector<std::uint32_t>& queue_at_arrival, const DriftTestConfig& cfg);

struct StabilityProbeOptions {
    double tolerance = 0.01;
    std::uint64_t probe_jobs = 200000;
    double probe_cap = 0.99;
    /// Re-probe the final bracket ends with a fresh stream and flag the
    /// estimate as inconclusive if either classification flips.
    bool verify_bracket = true;
    DriftTestConfig drift;
};

struct StabilityProbe {
    double rho;
    DriftReport drift;
};

struct MaxUtilizationEstimate {
    double rho;   ///< midpoint of the final bracket
    double lo;
    double hi;
    bool conclusive;
    /// Mean server time per job used to convert rho to an arrival rate.
    double server_time_per_job;
    std::vector<StabilityProbe> probes;

    double lambda_max(int workers) const { return rho * workers / server_time_per_job; }
};

/// Bisection on the utilization rho = lambda E[J_tot] / s of a single-class
/// workload, where E[J_tot] is the mean server time per job (k E[S], or l/mu
/// for exponential (s,k,l)). Each probe is a drift-tested simulation.
MaxUtilizationEstimate estimate_max_stable_utilization(const SystemConfig& cfg, const JobClass& job_class,
                                                       const StabilityProbeOptions& options, const RngStream& rng);

/// Mean server time consumed by one job of the class under cfg's preemption
/// policy; analytic where a closed form exists, Monte Carlo otherwise.
double mean_server_time_per_job(const SystemConfig& cfg, const JobClass& job_class, const RngStream& rng);

/// For each barrier job that had to queue: start instant minus the first
/// instant at which k workers were available while it was at the head of the
/// queue. A worker is available once its task's work is done, even if it is
/// still held by per-task overhead. Jobs that start on arrival are excluded.
std::vector<Time> idle_gap_trace(const SystemConfig& cfg, const WorkloadSpec& spec, const Horizon& horizon,
                                 const RngStream& rng);

struct SaturatedOptions {
    std::uint64_t starts = 100000;
    std::uint64_t warmup_starts = 1000;
    bool track_occupancy = false;
};

/// Perpetually backlogged run (the queue never empties).
struct SaturatedResult {
    double start_rate = 0.0;  ///< job starts per unit time
    std::uint64_t starts = 0;
    Time elapsed = 0.0;
    double mean_total_server_time = 0.0;
    double mean_useful_server_time = 0.0;
    /// Time fraction per state, keyed by (c_{k-l+1}, ..., c_k): the number of
    /// started jobs with r tasks still running.
    std::map<std::vector<int>, double> occupancy;
};

SaturatedResult run_saturated(const SystemConfig& cfg, const JobClass& job_class, const SaturatedOptions& options,
                              const RngStream& rng);

}  // namespace barriersim
