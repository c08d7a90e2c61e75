#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "barriersim/distributions.hpp"
#include "barriersim/overhead.hpp"

namespace barriersim {

/// Raised for configurations that violate a documented invariant. The message
/// lists every violation, one per line.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> issues);
    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    std::vector<std::string> issues_;
};

enum class BarrierMode { OneBarrier, TwoBarrier };

const char* to_string(BarrierMode mode) noexcept;

/// How the blocking overhead enters the simulation.
enum class OverheadInjection {
    /// Every task of every job holds its worker for an extra independent draw
    /// after its work completes.
    PerTask,
    /// Only jobs that had to queue are affected: the head job waits one draw
    /// between the instant it could start and its actual start.
    QueuedStart,
};

const char* to_string(OverheadInjection injection) noexcept;

struct OverheadConfig {
    Time interval = RevivePollingModel::kDefaultInterval;
    /// Rate of the arrival-triggered offers; defaults to the workload's
    /// Poisson arrival rate.
    std::optional<double> arrival_rate;
    OverheadInjection injection = OverheadInjection::PerTask;
};

/// (s,k,l) straggler preemption: a job departs once `l` of its tasks finish.
struct SklPolicy {
    int l;
};

struct SystemConfig {
    int workers = 1;
    BarrierMode mode = BarrierMode::OneBarrier;
    std::optional<SklPolicy> skl;
    std::optional<OverheadConfig> overhead;
};

struct JobClass {
    double weight = 1.0;
    bool has_start_barrier = true;
    TaskCountPmf k_dist = TaskCountPmf::fixed(1);
    TaskServiceDist service = TaskServiceDist::exponential(1.0);
};

struct PoissonArrivals {
    double rate;
};
struct DeterministicArrivals {
    Time interval;
};
using ArrivalProcess = std::variant<PoissonArrivals, DeterministicArrivals>;

struct WorkloadSpec {
    ArrivalProcess arrival = PoissonArrivals{1.0};
    std::vector<JobClass> classes;

    /// Jobs per second for either arrival kind.
    double arrival_rate() const;
    bool has_poisson_arrivals() const { return std::holds_alternative<PoissonArrivals>(arrival); }
};

/// Every violated invariant of the (config, workload) pair; empty when valid.
std::vector<std::string> validate(const SystemConfig& cfg, const WorkloadSpec& spec);
/// Throws ConfigError listing all violations.
void require_valid(const SystemConfig& cfg, const WorkloadSpec& spec);

/// lambda * E[K] * E[task service] / s. Rejects deterministic arrivals.
double utilization(const WorkloadSpec& spec, const SystemConfig& cfg);

/// Arrival rate that gives the workload the requested utilization.
double arrival_rate_for_utilization(double rho, const std::vector<JobClass>& classes, int workers);

/// The overhead model a run uses, with lambda resolved against the workload.
std::optional<RevivePollingModel> resolve_overhead(const SystemConfig& cfg, const WorkloadSpec& spec);

/// Number of tasks that must finish before a job with `k` tasks departs.
inline int required_completions(const SystemConfig& cfg, int k) { return cfg.skl ? cfg.skl->l : k; }

struct JobRecord {
    std::uint64_t n = 0;
    int class_id = 0;
    int k = 0;
    Time arrival = 0.0;
    std::vector<Time> task_starts;
    std::vector<Time> task_finishes;  // preempted tasks carry their preemption instant
    Time departure = 0.0;
    int preempted = 0;
    Time total_server_time = 0.0;
    Time useful_server_time = 0.0;

    Time last_start() const;
    Time waiting() const { return last_start() - arrival; }
    Time sojourn() const { return departure - arrival; }
};

/// Checks the per-record invariants; returns the violated ones.
std::vector<std::string> validate_record(const JobRecord& rec, const SystemConfig& cfg, bool has_start_barrier);

}  // namespace barriersim
