#include "barriersim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "barriersim/stability.hpp"

namespace barriersim {

namespace {

constexpr Time kInf = std::numeric_limits<Time>::infinity();
constexpr std::uint64_t kNoJob = std::numeric_limits<std::uint64_t>::max();

enum class EventType : std::uint8_t { Arrival, WorkDone, TaskFinish, StartAttempt };

struct Event {
    Time time;
    std::uint64_t seq;
    EventType type;
    std::uint64_t job;
    int task;
};

struct LaterEvent {
    bool operator()(const Event& a, const Event& b) const {
        return a.time > b.time || (a.time == b.time && a.seq > b.seq);
    }
};

enum class WorkerStatus : std::uint8_t { Idle, Busy, Blocked };
enum class TaskStatus : std::uint8_t { Pending, Running, Done, Preempted };

struct Task {
    Time work = 0.0;
    Time overhead = 0.0;
    Time start = 0.0;
    Time finish = 0.0;
    int worker = -1;
    TaskStatus status = TaskStatus::Pending;
    bool work_done = false;
};

struct Job {
    std::uint64_t n = 0;
    int class_id = 0;
    int k = 0;
    int l = 0;
    bool barrier = true;
    Time arrival = 0.0;
    std::vector<Task> tasks;
    int started = 0;
    int running = 0;
    int completed = 0;
    int preempted = 0;
    bool departed = false;
    Time departure = 0.0;
    Time ready = kInf;  // first instant k workers were available while at the head
    bool start_pending = false;
    double total_server = 0.0;
    double useful_server = 0.0;
};

enum class EngineMode { Open, Saturated };

class Engine {
public:
    Engine(const SystemConfig& cfg, const WorkloadSpec& spec, const RngStream& root, EngineMode mode)
        : cfg_(cfg),
          spec_(spec),
          mode_(mode),
          arrivals_rng_(root.split(StreamId::Arrivals)),
          class_rng_(root.split(StreamId::ClassChoice)),
          service_rng_(root.split(StreamId::Service)),
          overhead_rng_(root.split(StreamId::Overhead)),
          workers_(static_cast<std::size_t>(cfg.workers), WorkerStatus::Idle),
          worker_busy_(static_cast<std::size_t>(cfg.workers), 0.0),
          idle_(cfg.workers) {
        require_valid(cfg, spec);
        overhead_model_ = resolve_overhead(cfg, spec);
        if (overhead_model_) injection_ = cfg.overhead->injection;
        idle_stack_.reserve(workers_.size());
        for (int w = cfg.workers - 1; w >= 0; --w) idle_stack_.push_back(w);
        cumulative_weight_.reserve(spec.classes.size());
        double acc = 0.0;
        for (const auto& c : spec.classes) cumulative_weight_.push_back(acc += c.weight);
    }

    SimResult run_open(const RunOptions& options) {
        options_ = &options;
        horizon_ = options.horizon;
        if (horizon_.kind == Horizon::Kind::Jobs) {
            if (horizon_.jobs == 0) throw std::invalid_argument("job horizon must be positive");
            warmup_ = options.warmup_jobs.value_or(horizon_.jobs / 10);
            if (*warmup_ >= horizon_.jobs) throw std::invalid_argument("warmup must be smaller than the horizon");
            series_stride_ = std::max<std::uint64_t>(1, horizon_.jobs / 10000);
        } else {
            if (!(horizon_.time > 0.0)) throw std::invalid_argument("time horizon must be positive");
            if (options.warmup_jobs) warmup_ = *options.warmup_jobs;
            series_stride_ = 16;
        }
        trace_gaps_ = options.trace_idle_gaps;
        keep_records_ = options.keep_records;

        schedule_next_arrival();
        loop([] { return false; });

        result_.end_time = now_;
        result_.worker_busy_time = worker_busy_;
        result_.jobs_arrived = next_n_;
        result_.warmup_jobs = warmup_.value_or(next_n_);
        const Time window = measure_end_ - measure_start_;
        result_.busy_fraction = (std::isfinite(window) && window > 0.0) ? busy_in_window_ / (cfg_.workers * window) : 0.0;
        result_.drift = drift_test(result_.queue_at_arrival, options.drift);
        return std::move(result_);
    }

    SaturatedResult run_saturated(const SaturatedOptions& options) {
        track_occupancy_ = options.track_occupancy;
        running_counts_.assign(static_cast<std::size_t>(spec_.classes.front().k_dist.max_k()) + 1, 0);
        const std::uint64_t target = options.warmup_starts + options.starts;
        warmup_starts_ = options.warmup_starts;
        if (warmup_starts_ == 0) window_start_ = 0.0;
        refill_backlog();
        try_start();
        loop([&] { return starts_ >= target; });

        SaturatedResult out;
        out.starts = starts_ - warmup_starts_;
        out.elapsed = now_ - window_start_;
        out.start_rate = out.elapsed > 0.0 ? static_cast<double>(out.starts) / out.elapsed : 0.0;
        if (saturated_departures_ > 0) {
            out.mean_total_server_time = saturated_total_ / saturated_departures_;
            out.mean_useful_server_time = saturated_useful_ / saturated_departures_;
        }
        if (track_occupancy_) {
            double total = 0.0;
            for (const auto& [key, t] : occupancy_) total += t;
            for (auto& [key, t] : occupancy_) out.occupancy[key] = t / total;
        }
        return out;
    }

private:
    template <class StopFn>
    void loop(StopFn should_stop) {
        while (!events_.empty() && !should_stop()) {
            const Event ev = events_.top();
            events_.pop();
            if (track_occupancy_ && std::isfinite(window_start_) && ev.time > now_) {
                occupancy_[occupancy_key()] += ev.time - std::max(now_, window_start_);
            }
            now_ = ev.time;
            switch (ev.type) {
                case EventType::Arrival: on_arrival(); break;
                case EventType::WorkDone: on_work_done(ev.job, ev.task); break;
                case EventType::TaskFinish: on_task_finish(ev.job, ev.task); break;
                case EventType::StartAttempt: on_start_attempt(ev.job); break;
            }
            note_head_ready();
            if (options_ && options_->observer) {
                options_->observer(SimSnapshot{now_, idle_, cfg_.workers - idle_ - blocked_, blocked_, queue_.size()});
            }
        }
    }

    void push_event(Time t, EventType type, std::uint64_t job = kNoJob, int task = -1) {
        events_.push(Event{t, seq_++, type, job, task});
    }

    Job* find_job(std::uint64_t n) {
        if (n < base_n_ || n >= base_n_ + jobs_.size()) return nullptr;
        return &jobs_[n - base_n_];
    }

    // --- arrivals -----------------------------------------------------------

    Time next_interarrival() {
        if (const auto* p = std::get_if<PoissonArrivals>(&spec_.arrival)) return arrivals_rng_.exponential(p->rate);
        return std::get<DeterministicArrivals>(spec_.arrival).interval;
    }

    void schedule_next_arrival() {
        if (horizon_.kind == Horizon::Kind::Jobs && scheduled_arrivals_ >= horizon_.jobs) return;
        const Time t = last_arrival_time_ + next_interarrival();
        if (horizon_.kind == Horizon::Kind::Time && t > horizon_.time) return;
        last_arrival_time_ = t;
        ++scheduled_arrivals_;
        push_event(t, EventType::Arrival);
    }

    int choose_class() {
        if (cumulative_weight_.size() == 1) return 0;
        const double u = class_rng_.uniform() * cumulative_weight_.back();
        for (std::size_t c = 0; c < cumulative_weight_.size(); ++c)
            if (u < cumulative_weight_[c]) return static_cast<int>(c);
        return static_cast<int>(cumulative_weight_.size()) - 1;
    }

    Job& create_job(Time arrival) {
        Job job;
        job.n = next_n_++;
        job.class_id = choose_class();
        const auto& cls = spec_.classes[static_cast<std::size_t>(job.class_id)];
        job.k = cls.k_dist.sample(class_rng_);
        job.l = required_completions(cfg_, job.k);
        job.barrier = cls.has_start_barrier;
        job.arrival = arrival;
        job.tasks.resize(static_cast<std::size_t>(job.k));
        for (auto& t : job.tasks) {
            t.work = cls.service.sample(service_rng_);
            if (injection_ == OverheadInjection::PerTask && overhead_model_)
                t.overhead = sample_overhead(*overhead_model_, overhead_rng_);
        }
        jobs_.push_back(std::move(job));
        return jobs_.back();
    }

    void on_arrival() {
        const auto n = next_n_;
        if (horizon_.kind == Horizon::Kind::Time && !warmup_ && now_ >= 0.1 * horizon_.time) warmup_ = n;
        if (warmup_ && n == *warmup_) measure_start_ = now_;

        const auto queue_len = static_cast<std::uint32_t>(queue_.size());
        result_.queue_at_arrival.push_back(queue_len);
        if (n % series_stride_ == 0) result_.queue_series.push_back({now_, queue_len});

        create_job(now_);
        queue_.push_back(n);
        schedule_next_arrival();
        // No further arrival was scheduled: this is the last one.
        if (scheduled_arrivals_ == next_n_) measure_end_ = now_;

        arriving_job_ = n;
        try_start();
        arriving_job_ = kNoJob;
    }

    // --- starting jobs ------------------------------------------------------

    void refill_backlog() {
        if (mode_ == EngineMode::Saturated && queue_.empty()) {
            create_job(now_);
            queue_.push_back(jobs_.back().n);
        }
    }

    void try_start() {
        while (!queue_.empty()) {
            Job& head = jobs_[queue_.front() - base_n_];
            if (head.barrier) {
                if (head.start_pending || idle_ < head.k) break;
                const bool immediate = head.n == arriving_job_;
                if (!std::isfinite(head.ready)) head.ready = now_;
                if (injection_ == OverheadInjection::QueuedStart && overhead_model_ && !immediate) {
                    head.start_pending = true;
                    push_event(now_ + sample_overhead(*overhead_model_, overhead_rng_), EventType::StartAttempt,
                               head.n);
                    break;
                }
                start_barrier_job(head, immediate);
            } else {
                while (idle_ > 0 && head.started < head.k) start_task(head, head.started);
                if (head.started < head.k) break;
            }
            queue_.pop_front();
            refill_backlog();
        }
    }

    void on_start_attempt(std::uint64_t n) {
        if (queue_.empty() || queue_.front() != n) throw std::logic_error("start attempt for a job not at the head");
        Job& head = jobs_[n - base_n_];
        if (idle_ < head.k) throw std::logic_error("delayed start without enough idle workers");
        head.start_pending = false;
        start_barrier_job(head, false);
        queue_.pop_front();
        refill_backlog();
        try_start();
    }

    void start_barrier_job(Job& job, bool immediate) {
        for (int i = 0; i < job.k; ++i) start_task(job, i);
        if (track_occupancy_) ++running_counts_[static_cast<std::size_t>(job.k)];
        ++starts_;
        if (mode_ == EngineMode::Saturated && starts_ == warmup_starts_) window_start_ = now_;
        if (trace_gaps_ && !immediate && in_measurement(job.n)) result_.idle_gaps.push_back(now_ - job.ready);
    }

    void start_task(Job& job, int i) {
        const int w = idle_stack_.back();
        idle_stack_.pop_back();
        --idle_;
        workers_[static_cast<std::size_t>(w)] = WorkerStatus::Busy;
        Task& t = job.tasks[static_cast<std::size_t>(i)];
        t.start = now_;
        t.worker = w;
        t.status = TaskStatus::Running;
        ++job.started;
        ++job.running;
        if (t.overhead > 0.0) push_event(now_ + t.work, EventType::WorkDone, job.n, i);
        push_event(now_ + t.work + t.overhead, EventType::TaskFinish, job.n, i);
    }

    /// Marks the head job ready once k workers are available, counting
    /// workers that finished their work but are still held by overhead.
    void note_head_ready() {
        if (queue_.empty()) return;
        Job& head = jobs_[queue_.front() - base_n_];
        if (head.barrier && !std::isfinite(head.ready) && idle_ + overhead_phase_ >= head.k) head.ready = now_;
    }

    // --- completions --------------------------------------------------------

    void on_work_done(std::uint64_t n, int i) {
        Job* job = find_job(n);
        if (!job || job->departed) return;
        Task& t = job->tasks[static_cast<std::size_t>(i)];
        if (t.status != TaskStatus::Running) return;
        t.work_done = true;
        ++overhead_phase_;
    }

    void release_task(Job& job, Task& t, TaskStatus status) {
        t.status = status;
        t.finish = now_;
        if (t.work_done) --overhead_phase_;
        const Time duration = now_ - t.start;
        account_busy(t.worker, t.start, now_);
        job.total_server += duration;
        if (status == TaskStatus::Done) job.useful_server += duration;
        --job.running;
    }

    void free_worker(int w) {
        workers_[static_cast<std::size_t>(w)] = WorkerStatus::Idle;
        idle_stack_.push_back(w);
        ++idle_;
    }

    void on_task_finish(std::uint64_t n, int i) {
        Job* job = find_job(n);
        if (!job || job->departed) return;
        Task& t = job->tasks[static_cast<std::size_t>(i)];
        if (t.status != TaskStatus::Running) return;
        const int running_before = job->running;
        release_task(*job, t, TaskStatus::Done);
        ++job->completed;
        if (cfg_.mode == BarrierMode::TwoBarrier) {
            workers_[static_cast<std::size_t>(t.worker)] = WorkerStatus::Blocked;
            ++blocked_;
        } else {
            free_worker(t.worker);
        }
        if (track_occupancy_ && job->barrier) {
            --running_counts_[static_cast<std::size_t>(running_before)];
            if (job->completed < job->l) ++running_counts_[static_cast<std::size_t>(running_before - 1)];
        }
        if (job->completed == job->l) depart(*job);
        try_start();
    }

    void depart(Job& job) {
        job.departure = now_;
        job.departed = true;
        for (auto& t : job.tasks) {
            if (t.status == TaskStatus::Running) {
                release_task(job, t, TaskStatus::Preempted);
                ++job.preempted;
                free_worker(t.worker);
            } else if (t.status == TaskStatus::Done && workers_[static_cast<std::size_t>(t.worker)] == WorkerStatus::Blocked) {
                --blocked_;
                free_worker(t.worker);
            }
        }
        if (mode_ == EngineMode::Saturated && std::isfinite(window_start_)) {
            ++saturated_departures_;
            saturated_total_ += job.total_server;
            saturated_useful_ += job.useful_server;
        }
        while (!jobs_.empty() && jobs_.front().departed) {
            emit(jobs_.front());
            jobs_.pop_front();
            ++base_n_;
        }
    }

    bool in_measurement(std::uint64_t n) const { return warmup_ && n >= *warmup_; }

    void emit(const Job& job) {
        result_.all_jobs_server_time += job.total_server;
        if (mode_ == EngineMode::Saturated || !in_measurement(job.n)) return;
        Time last_start = job.arrival;
        for (const auto& t : job.tasks) last_start = std::max(last_start, t.start);
        result_.waiting.push_back(last_start - job.arrival);
        result_.sojourn.push_back(job.departure - job.arrival);
        result_.total_server_time += job.total_server;
        result_.useful_server_time += job.useful_server;
        if (keep_records_) {
            JobRecord rec;
            rec.n = job.n;
            rec.class_id = job.class_id;
            rec.k = job.k;
            rec.arrival = job.arrival;
            rec.departure = job.departure;
            rec.preempted = job.preempted;
            rec.total_server_time = job.total_server;
            rec.useful_server_time = job.useful_server;
            rec.task_starts.reserve(job.tasks.size());
            rec.task_finishes.reserve(job.tasks.size());
            for (const auto& t : job.tasks) {
                rec.task_starts.push_back(t.start);
                rec.task_finishes.push_back(t.finish);
            }
            result_.records.push_back(std::move(rec));
        }
    }

    void account_busy(int w, Time start, Time end) {
        worker_busy_[static_cast<std::size_t>(w)] += end - start;
        const Time lo = std::max(start, measure_start_);
        const Time hi = std::min(end, measure_end_);
        if (hi > lo) busy_in_window_ += hi - lo;
    }

    std::vector<int> occupancy_key() const {
        const auto& cls = spec_.classes.front();
        const int k = cls.k_dist.max_k();
        const int l = required_completions(cfg_, k);
        return {running_counts_.begin() + (k - l + 1), running_counts_.begin() + (k + 1)};
    }

    const SystemConfig& cfg_;
    const WorkloadSpec& spec_;
    EngineMode mode_;
    const RunOptions* options_ = nullptr;

    RngStream arrivals_rng_;
    RngStream class_rng_;
    RngStream service_rng_;
    RngStream overhead_rng_;
    std::optional<RevivePollingModel> overhead_model_;
    std::optional<OverheadInjection> injection_;
    std::vector<double> cumulative_weight_;

    std::priority_queue<Event, std::vector<Event>, LaterEvent> events_;
    std::uint64_t seq_ = 0;
    Time now_ = 0.0;

    std::vector<WorkerStatus> workers_;
    std::vector<int> idle_stack_;
    std::vector<double> worker_busy_;
    int idle_;
    int blocked_ = 0;
    int overhead_phase_ = 0;

    std::deque<Job> jobs_;
    std::uint64_t base_n_ = 0;
    std::deque<std::uint64_t> queue_;
    std::uint64_t next_n_ = 0;
    std::uint64_t arriving_job_ = kNoJob;

    Horizon horizon_;
    std::uint64_t scheduled_arrivals_ = 0;
    Time last_arrival_time_ = 0.0;
    std::optional<std::uint64_t> warmup_;
    std::uint64_t series_stride_ = 1;
    bool trace_gaps_ = false;
    bool keep_records_ = false;
    Time measure_start_ = kInf;
    Time measure_end_ = kInf;
    double busy_in_window_ = 0.0;

    std::uint64_t starts_ = 0;
    std::uint64_t warmup_starts_ = 0;
    Time window_start_ = kInf;
    bool track_occupancy_ = false;
    std::vector<int> running_counts_;
    std::map<std::vector<int>, double> occupancy_;
    std::uint64_t saturated_departures_ = 0;
    double saturated_total_ = 0.0;
    double saturated_useful_ = 0.0;

    SimResult result_;
};

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

WorkloadSpec single_class_workload(const JobClass& cls, double lambda) {
    JobClass c = cls;
    c.weight = 1.0;
    return WorkloadSpec{PoissonArrivals{lambda}, {c}};
}

}  // namespace

double SimResult::mean_waiting() const { return mean_of(waiting); }
double SimResult::mean_sojourn() const { return mean_of(sojourn); }
double SimResult::mean_total_server_time() const {
    return waiting.empty() ? 0.0 : total_server_time / static_cast<double>(waiting.size());
}
double SimResult::mean_useful_server_time() const {
    return waiting.empty() ? 0.0 : useful_server_time / static_cast<double>(waiting.size());
}

double empirical_quantile(std::vector<double> samples, double p) {
    if (samples.empty()) throw std::invalid_argument("quantile of an empty sample");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile level must lie in (0, 1)");
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(samples.size())));
    rank = std::clamp<std::size_t>(rank, 1, samples.size());
    auto it = samples.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(samples.begin(), it, samples.end());
    return *it;
}

SimResult run(const SystemConfig& cfg, const WorkloadSpec& spec, const RunOptions& options, const RngStream& rng) {
    Engine engine(cfg, spec, rng, EngineMode::Open);
    return engine.run_open(options);
}

DriftReport drift_test(const std::vector<std::uint32_t>& queue_at_arrival, const DriftTestConfig& cfg) {
    DriftReport report;
    const std::size_t n = queue_at_arrival.size();
    if (n < 4) return report;
    const std::size_t first = n / 2;
    const double m = static_cast<double>(n - first);
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = first; i < n; ++i) {
        sx += static_cast<double>(i);
        sy += queue_at_arrival[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = first; i < n; ++i) {
        const double dx = static_cast<double>(i) - mx;
        sxx += dx * dx;
        sxy += dx * (queue_at_arrival[i] - my);
    }
    report.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    report.final_queue = queue_at_arrival.back();
    report.unstable = report.slope > cfg.slope_threshold && report.final_queue > cfg.final_queue_threshold;
    return report;
}

double mean_server_time_per_job(const SystemConfig& cfg, const JobClass& job_class, const RngStream& rng) {
    if (!cfg.skl) return job_class.k_dist.mean() * job_class.service.mean();
    const int l = cfg.skl->l;
    if (job_class.service.is_exponential()) return l / job_class.service.exponential_rate();
    // Server time of one job: the l winners run to completion, the k - l
    // stragglers run until the l-th completion.
    RngStream draws = rng.split(0x5e47ULL);
    constexpr int kSamples = 200000;
    double total = 0.0;
    std::vector<double> times;
    for (int i = 0; i < kSamples; ++i) {
        const int k = job_class.k_dist.sample(draws);
        times.resize(static_cast<std::size_t>(k));
        for (auto& t : times) t = job_class.service.sample(draws);
        std::sort(times.begin(), times.end());
        double j = 0.0;
        for (int r = 0; r < l; ++r) j += times[static_cast<std::size_t>(r)];
        j += (k - l) * times[static_cast<std::size_t>(l - 1)];
        total += j;
    }
    return total / kSamples;
}

MaxUtilizationEstimate estimate_max_stable_utilization(const SystemConfig& cfg, const JobClass& job_class,
                                                       const StabilityProbeOptions& options, const RngStream& rng) {
    if (!(options.tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
    MaxUtilizationEstimate est{};
    est.server_time_per_job = mean_server_time_per_job(cfg, job_class, rng);

    auto probe = [&](double rho, std::uint64_t stream) {
        const double lambda = rho * cfg.workers / est.server_time_per_job;
        const WorkloadSpec spec = single_class_workload(job_class, lambda);
        RunOptions run_opts;
        run_opts.horizon = Horizon::job_count(options.probe_jobs);
        run_opts.warmup_jobs = 0;
        run_opts.drift = options.drift;
        const SimResult r = run(cfg, spec, run_opts, rng.split(stream));
        est.probes.push_back({rho, r.drift});
        return r.drift.unstable;
    };

    double lo = 0.0, hi = 1.0;
    while (hi - lo > options.tolerance) {
        const double mid = std::min(0.5 * (lo + hi), options.probe_cap);
        if (mid <= lo) break;
        if (probe(mid, 1))
            hi = mid;
        else
            lo = mid;
    }
    est.lo = lo;
    est.hi = hi;
    est.rho = 0.5 * (lo + hi);
    est.conclusive = true;
    if (options.verify_bracket) {
        if (lo > 0.0 && probe(lo, 2)) est.conclusive = false;
        if (hi < 1.0 && !probe(hi, 2)) est.conclusive = false;
    }
    return est;
}

std::vector<Time> idle_gap_trace(const SystemConfig& cfg, const WorkloadSpec& spec, const Horizon& horizon,
                                 const RngStream& rng) {
    RunOptions opts;
    opts.horizon = horizon;
    opts.trace_idle_gaps = true;
    return run(cfg, spec, opts, rng).idle_gaps;
}

SaturatedResult run_saturated(const SystemConfig& cfg, const JobClass& job_class, const SaturatedOptions& options,
                              const RngStream& rng) {
    if (!job_class.has_start_barrier) throw std::invalid_argument("saturated runs require a barrier job class");
    if (!job_class.k_dist.is_fixed()) throw std::invalid_argument("saturated runs require a fixed task count");
    if (options.starts == 0) throw std::invalid_argument("saturated run needs at least one measured start");
    // The arrival rate is unused in saturated mode; any positive value validates.
    const WorkloadSpec spec = single_class_workload(job_class, 1.0);
    Engine engine(cfg, spec, rng, EngineMode::Saturated);
    return engine.run_saturated(options);
}

}  // namespace barriersim
