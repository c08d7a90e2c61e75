#include "doctest.h"

#include <cmath>
#include <numeric>

#include "barriersim/simulator.hpp"
#include "barriersim/stability.hpp"
#include "oracles.hpp"

using namespace barriersim;

namespace {

JobClass barrier_class(int k, double mu) {
    return JobClass{1.0, true, TaskCountPmf::fixed(k), TaskServiceDist::exponential(mu)};
}

WorkloadSpec poisson(double lambda, std::vector<JobClass> classes) { return WorkloadSpec{PoissonArrivals{lambda}, std::move(classes)}; }

// Erlang C mean waiting time of M/M/c.
double erlang_c_wait(double lambda, double mu, int c) {
    const double a = lambda / mu;
    double term = 1.0, sum = 1.0;
    for (int i = 1; i < c; ++i) {
        term *= a / i;
        sum += term;
    }
    const double last = term * a / c;
    const double rho = a / c;
    const double pc = last / (1.0 - rho) / (sum + last / (1.0 - rho));
    return pc / (c * mu - lambda);
}

}  // namespace

TEST_CASE("empirical quantile") {
    CHECK(empirical_quantile({3.0, 1.0, 2.0, 4.0}, 0.5) == 2.0);
    CHECK(empirical_quantile({3.0, 1.0, 2.0, 4.0}, 0.99) == 4.0);
    CHECK(empirical_quantile({3.0, 1.0, 2.0, 4.0}, 0.26) == 2.0);
    CHECK_THROWS(empirical_quantile({3.0}, 1.0));
    CHECK_THROWS(empirical_quantile({}, 0.5));
}

TEST_CASE("single-task jobs form an M/M/c queue") {
    for (int c : {1, 4}) {
        SystemConfig sys{c, BarrierMode::OneBarrier, std::nullopt, std::nullopt};
        const double lambda = 0.6 * c;
        RunOptions opt;
        opt.horizon = Horizon::job_count(400000);
        const auto r = run(sys, poisson(lambda, {barrier_class(1, 1.0)}), opt, RngStream(3, 0));
        CHECK(r.mean_waiting() == doctest::Approx(erlang_c_wait(lambda, 1.0, c)).epsilon(0.04));
        CHECK(r.mean_sojourn() == doctest::Approx(erlang_c_wait(lambda, 1.0, c) + 1.0).epsilon(0.02));
        CHECK(r.busy_fraction == doctest::Approx(0.6).epsilon(0.02));
        CHECK_FALSE(r.drift.unstable);
    }
}

TEST_CASE("runs are reproducible from the seed") {
    SystemConfig sys{8, BarrierMode::OneBarrier, std::nullopt, std::nullopt};
    const auto spec = poisson(1.0, {barrier_class(4, 1.0)});
    RunOptions opt;
    opt.horizon = Horizon::job_count(5000);
    const auto a = run(sys, spec, opt, RngStream(9, 0));
    const auto b = run(sys, spec, opt, RngStream(9, 0));
    const auto c = run(sys, spec, opt, RngStream(10, 0));
    CHECK(a.waiting == b.waiting);
    CHECK(a.sojourn == b.sojourn);
    CHECK(a.waiting != c.waiting);
}

TEST_CASE("job records obey the barrier and preemption rules") {
    struct Case {
        BarrierMode mode;
        std::optional<int> l;
        bool barrier;
    };
    for (const Case& cs : {Case{BarrierMode::OneBarrier, std::nullopt, true}, Case{BarrierMode::OneBarrier, 3, true},
                           Case{BarrierMode::TwoBarrier, std::nullopt, true}, Case{BarrierMode::TwoBarrier, 2, true},
                           Case{BarrierMode::OneBarrier, std::nullopt, false}}) {
        SystemConfig sys{10, cs.mode, std::nullopt, std::nullopt};
        if (cs.l) sys.skl = SklPolicy{*cs.l};
        JobClass cls = barrier_class(4, 1.0);
        cls.has_start_barrier = cs.barrier;
        RunOptions opt;
        opt.horizon = Horizon::job_count(20000);
        opt.keep_records = true;
        int max_busy = 0;
        opt.observer = [&](const SimSnapshot& snap) {
            CHECK(snap.idle + snap.busy + snap.blocked == 10);
            if (cs.mode == BarrierMode::OneBarrier) CHECK(snap.blocked == 0);
            max_busy = std::max(max_busy, snap.busy + snap.blocked);
        };
        const auto r = run(sys, poisson(0.8, {cls}), opt, RngStream(4, 0));
        REQUIRE(!r.records.empty());
        CHECK(r.records.size() == r.measured_jobs());
        double last = 0.0;
        bool fifo = true, unsynchronized = false;
        for (const auto& rec : r.records) {
            const auto issues = validate_record(rec, sys, cs.barrier);
            CHECK_MESSAGE(issues.empty(), (issues.empty() ? "" : issues.front()));
            const double first = *std::min_element(rec.task_starts.begin(), rec.task_starts.end());
            fifo = fifo && first >= last;
            last = first;
            unsynchronized = unsynchronized || rec.last_start() != first;
        }
        CHECK(fifo);
        CHECK(unsynchronized == !cs.barrier);
        CHECK(max_busy <= 10);
    }
}

TEST_CASE("two-barrier jobs hold workers until the whole job leaves") {
    SystemConfig sys{4, BarrierMode::TwoBarrier, std::nullopt, std::nullopt};
    RunOptions opt;
    opt.horizon = Horizon::job_count(20000);
    opt.keep_records = true;
    const auto r = run(sys, poisson(0.3, {barrier_class(4, 1.0)}), opt, RngStream(6, 0));
    // with s = k no two jobs ever overlap
    for (std::size_t i = 1; i < r.records.size(); ++i)
        CHECK(r.records[i].task_starts.front() >= r.records[i - 1].departure);
}

TEST_CASE("(s,k,l) server time accounting") {
    SystemConfig sys{16, BarrierMode::OneBarrier, SklPolicy{8}, std::nullopt};
    RunOptions opt;
    opt.horizon = Horizon::job_count(100000);
    const auto r = run(sys, poisson(1.0, {barrier_class(16, 2.0)}), opt, RngStream(8, 0));
    const auto expect = expected_job_server_time(16, 8, 2.0);
    CHECK(r.mean_total_server_time() == doctest::Approx(expect.total).epsilon(0.01));
    CHECK(r.mean_useful_server_time() == doctest::Approx(expect.useful).epsilon(0.02));
}

TEST_CASE("two-barrier s = k is an M/G/1 queue") {
    SystemConfig sys{2, BarrierMode::TwoBarrier, std::nullopt, std::nullopt};
    const double mu = 1.0;
    const double lambda = 0.3 / 1.5;  // mean service H_2 = 1.5
    RunOptions opt;
    opt.horizon = Horizon::job_count(1000000);
    const auto r = run(sys, poisson(lambda, {barrier_class(2, mu)}), opt, RngStream(12, 0));
    CHECK(r.mean_waiting() == doctest::Approx(oracle::pk_mean_waiting_max_exp(lambda, 2, mu)).epsilon(0.03));
}

TEST_CASE("drift test separates stable and unstable loads") {
    SystemConfig sys{8, BarrierMode::OneBarrier, std::nullopt, std::nullopt};
    const double limit = max_util_1barrier(8, 4);
    auto at = [&](double rho) {
        RunOptions opt;
        opt.horizon = Horizon::job_count(100000);
        const double lambda = rho * 8 / 4.0;
        return run(sys, poisson(lambda, {barrier_class(4, 1.0)}), opt, RngStream(21, 0)).drift;
    };
    CHECK_FALSE(at(0.8 * limit).unstable);
    CHECK(at(1.1 * limit).unstable);

    std::vector<std::uint32_t> flat(1000, 3), ramp(1000);
    std::iota(ramp.begin(), ramp.end(), 0u);
    CHECK_FALSE(drift_test(flat, {}).unstable);
    const auto d = drift_test(ramp, {});
    CHECK(d.unstable);
    CHECK(d.slope == doctest::Approx(1.0));
}

TEST_CASE("time horizon") {
    SystemConfig sys{4, BarrierMode::OneBarrier, std::nullopt, std::nullopt};
    RunOptions opt;
    opt.horizon = Horizon::sim_time(5000.0);
    const auto r = run(sys, poisson(1.0, {barrier_class(2, 1.0)}), opt, RngStream(2, 0));
    CHECK(r.jobs_arrived == doctest::Approx(5000).epsilon(0.05));
    CHECK(r.measured_jobs() > 4000);
}

TEST_CASE("saturated start rate matches the closed form for l = k") {
    for (auto [s, k] : {std::pair{8, 3}, std::pair{12, 4}}) {
        SystemConfig sys{s, BarrierMode::OneBarrier, std::nullopt, std::nullopt};
        SaturatedOptions opt;
        opt.starts = 100000;
        const auto r = run_saturated(sys, barrier_class(k, 1.0), opt, RngStream(5, 0));
        const double expect = 1.0 / static_cast<double>(oracle::harmonic(s) - oracle::harmonic(s - k));
        CHECK(r.start_rate == doctest::Approx(expect).epsilon(0.02));
    }
}

TEST_CASE("mixed barrier and non-barrier classes") {
    SystemConfig sys{8, BarrierMode::OneBarrier, std::nullopt, std::nullopt};
    JobClass a = barrier_class(4, 1.0);
    JobClass b = barrier_class(4, 1.0);
    a.weight = 0.5;
    b.weight = 0.5;
    b.has_start_barrier = false;
    RunOptions opt;
    opt.horizon = Horizon::job_count(30000);
    opt.keep_records = true;
    const auto r = run(sys, poisson(1.0, {a, b}), opt, RngStream(14, 0));
    int barrier_jobs = 0;
    for (const auto& rec : r.records) {
        CHECK(validate_record(rec, sys, rec.class_id == 0).empty());
        barrier_jobs += rec.class_id == 0;
    }
    CHECK(barrier_jobs / static_cast<double>(r.records.size()) == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("overhead delays jobs") {
    SystemConfig sys{32, BarrierMode::OneBarrier, std::nullopt, std::nullopt};
    const double mu = 16.0 / 32;
    const auto spec = poisson(0.7 * 32 / (16 / mu), {barrier_class(16, mu)});
    RunOptions opt;
    opt.horizon = Horizon::job_count(20000);
    const auto plain = run(sys, spec, opt, RngStream(1, 0));
    sys.overhead = OverheadConfig{};
    const auto slowed = run(sys, spec, opt, RngStream(1, 0));
    CHECK(slowed.mean_sojourn() > plain.mean_sojourn());

    sys.overhead->injection = OverheadInjection::QueuedStart;
    const auto gaps = idle_gap_trace(sys, spec, Horizon::job_count(20000), RngStream(1, 0));
    REQUIRE(!gaps.empty());
    for (double g : gaps) {
        CHECK(g >= 0.0);
        CHECK(g <= 1.0);
    }
}

TEST_CASE("simulated stability bracket contains the closed form") {
    SystemConfig sys{8, BarrierMode::TwoBarrier, std::nullopt, std::nullopt};
    StabilityProbeOptions opt;
    opt.probe_jobs = 60000;
    opt.tolerance = 0.02;
    const auto est = estimate_max_stable_utilization(sys, barrier_class(4, 1.0), opt, RngStream(1, 0));
    const double expect = two_barrier_stability(8, 4, 1.0).rho_max;
    CHECK(est.lo <= est.hi);
    CHECK(est.rho == doctest::Approx(expect).epsilon(0.06));
    CHECK(est.lambda_max(8) == doctest::Approx(est.rho * 8 / 4.0));
}
