#include "barriersim/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace barriersim {

namespace {

std::string join_lines(const std::vector<std::string>& issues) {
    std::ostringstream os;
    for (std::size_t i = 0; i < issues.size(); ++i) os << (i ? "\n" : "") << issues[i];
    return os.str();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::invalid_argument(join_lines(issues)), issues_(std::move(issues)) {}

const char* to_string(BarrierMode mode) noexcept {
    return mode == BarrierMode::OneBarrier ? "one" : "two";
}

const char* to_string(OverheadInjection injection) noexcept {
    return injection == OverheadInjection::PerTask ? "per_task" : "queued_start";
}

double WorkloadSpec::arrival_rate() const {
    if (const auto* p = std::get_if<PoissonArrivals>(&arrival)) return p->rate;
    return 1.0 / std::get<DeterministicArrivals>(arrival).interval;
}

std::vector<std::string> validate(const SystemConfig& cfg, const WorkloadSpec& spec) {
    std::vector<std::string> issues;
    if (cfg.workers < 1) issues.push_back("workers: s must be >= 1");

    if (const auto* p = std::get_if<PoissonArrivals>(&spec.arrival)) {
        if (!(std::isfinite(p->rate) && p->rate > 0.0)) issues.push_back("arrival: Poisson rate must be > 0");
    } else {
        const auto& d = std::get<DeterministicArrivals>(spec.arrival);
        if (!(std::isfinite(d.interval) && d.interval > 0.0))
            issues.push_back("arrival: deterministic interval must be > 0");
    }

    if (spec.classes.empty()) issues.push_back("classes: at least one job class is required");
    double weight_sum = 0.0;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const auto& cls = spec.classes[c];
        const std::string where = "classes[" + std::to_string(c) + "]";
        if (!(cls.weight >= 0.0 && cls.weight <= 1.0)) issues.push_back(where + ": weight must lie in [0, 1]");
        weight_sum += cls.weight;
        if (cls.k_dist.max_k() > cfg.workers)
            issues.push_back(where + ": task count k=" + std::to_string(cls.k_dist.max_k()) +
                             " exceeds the worker count s=" + std::to_string(cfg.workers));
        if (cfg.mode == BarrierMode::TwoBarrier && !cls.has_start_barrier)
            issues.push_back(where + ": TwoBarrier mode requires every class to be a barrier class");
        if (cfg.skl) {
            if (cfg.skl->l < 1) issues.push_back("skl: l must be >= 1");
            if (cfg.skl->l > cls.k_dist.min_k())
                issues.push_back(where + ": skl requires l <= k (l=" + std::to_string(cfg.skl->l) +
                                 ", k=" + std::to_string(cls.k_dist.min_k()) + ")");
            if (!cls.has_start_barrier)
                issues.push_back(where + ": skl preemption is only defined for barrier classes");
        }
    }
    if (!spec.classes.empty() && std::abs(weight_sum - 1.0) > 1e-12)
        issues.push_back("classes: weights must sum to 1");

    if (cfg.overhead) {
        if (!(std::isfinite(cfg.overhead->interval) && cfg.overhead->interval > 0.0))
            issues.push_back("overhead: polling interval must be > 0");
        if (cfg.overhead->arrival_rate && !(*cfg.overhead->arrival_rate >= 0.0))
            issues.push_back("overhead: arrival rate must be >= 0");
    }
    return issues;
}

void require_valid(const SystemConfig& cfg, const WorkloadSpec& spec) {
    auto issues = validate(cfg, spec);
    if (!issues.empty()) throw ConfigError(std::move(issues));
}

double utilization(const WorkloadSpec& spec, const SystemConfig& cfg) {
    if (!spec.has_poisson_arrivals())
        throw std::invalid_argument("utilization is defined for Poisson (rate-based) arrivals only");
    if (cfg.workers < 1) throw std::invalid_argument("workers must be >= 1");
    double work = 0.0;
    for (const auto& cls : spec.classes) work += cls.weight * cls.k_dist.mean() * cls.service.mean();
    return spec.arrival_rate() * work / cfg.workers;
}

double arrival_rate_for_utilization(double rho, const std::vector<JobClass>& classes, int workers) {
    double work = 0.0;
    for (const auto& cls : classes) work += cls.weight * cls.k_dist.mean() * cls.service.mean();
    if (!(work > 0.0)) throw std::invalid_argument("workload has zero mean work per job");
    return rho * workers / work;
}

std::optional<RevivePollingModel> resolve_overhead(const SystemConfig& cfg, const WorkloadSpec& spec) {
    if (!cfg.overhead) return std::nullopt;
    double rate = 0.0;
    if (cfg.overhead->arrival_rate)
        rate = *cfg.overhead->arrival_rate;
    else if (spec.has_poisson_arrivals())
        rate = spec.arrival_rate();
    return RevivePollingModel(cfg.overhead->interval, rate);
}

Time JobRecord::last_start() const {
    return task_starts.empty() ? arrival : *std::max_element(task_starts.begin(), task_starts.end());
}

std::vector<std::string> validate_record(const JobRecord& rec, const SystemConfig& cfg, bool has_start_barrier) {
    std::vector<std::string> issues;
    const std::string where = "job " + std::to_string(rec.n) + ": ";
    if (static_cast<int>(rec.task_starts.size()) != rec.k || static_cast<int>(rec.task_finishes.size()) != rec.k) {
        issues.push_back(where + "task vectors must have length k");
        return issues;
    }
    const Time first_start = *std::min_element(rec.task_starts.begin(), rec.task_starts.end());
    if (rec.arrival > first_start) issues.push_back(where + "a task starts before the job arrives");
    if (has_start_barrier && rec.last_start() != first_start)
        issues.push_back(where + "barrier job tasks must start simultaneously");
    if (rec.waiting() < 0.0) issues.push_back(where + "negative waiting time");
    if (rec.sojourn() < rec.waiting()) issues.push_back(where + "sojourn shorter than waiting time");
    Time latest_finish = first_start;
    for (int i = 0; i < rec.k; ++i) {
        if (rec.task_finishes[i] < rec.task_starts[i]) issues.push_back(where + "task finishes before it starts");
        latest_finish = std::max(latest_finish, rec.task_finishes[i]);
    }
    if (rec.departure != latest_finish) issues.push_back(where + "departure must equal the last task finish");
    const int expected_preempted = cfg.skl ? rec.k - cfg.skl->l : 0;
    if (rec.preempted != expected_preempted)
        issues.push_back(where + "preempted count must be " + std::to_string(expected_preempted));
    if (rec.useful_server_time > rec.total_server_time * (1.0 + 1e-12))
        issues.push_back(where + "useful server time exceeds total");
    return issues;
}

}  // namespace barriersim
