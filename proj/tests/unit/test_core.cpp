#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "barriersim/distributions.hpp"
#include "barriersim/model.hpp"
#include "barriersim/rng.hpp"
#include "oracles.hpp"

using namespace barriersim;

TEST_CASE("rng streams are reproducible and independent") {
    RngStream a(42, StreamId::Service), b(42, StreamId::Service), c(42, StreamId::Arrivals);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differs = differs || x != c.next_u64();
    }
    CHECK(differs);

    RngStream root(7, 0);
    auto s1 = root.split(3), s2 = root.split(3), s3 = root.split(4);
    CHECK(s1.next_u64() == s2.next_u64());
    CHECK(s1.next_u64() != s3.next_u64());
}

TEST_CASE("rng uniform and exponential moments") {
    RngStream r(1, 9);
    const int n = 200000;
    double su = 0.0, se = 0.0, se2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        su += u;
        const double e = r.exponential(4.0);
        se += e;
        se2 += e * e;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(se / n == doctest::Approx(0.25).epsilon(0.01));
    CHECK(se2 / n == doctest::Approx(2.0 / 16).epsilon(0.02));

    std::vector<int> hits(5, 0);
    for (int i = 0; i < 50000; ++i) ++hits[r.below(5)];
    for (int h : hits) CHECK(h == doctest::Approx(10000).epsilon(0.05));
}

TEST_CASE("task service distributions") {
    const auto e = TaskServiceDist::exponential(2.0);
    CHECK(e.is_exponential());
    CHECK(e.mean() == 0.5);
    CHECK(e.second_moment() == doctest::Approx(0.5));

    const auto b = TaskServiceDist::bimodal(1.0, 0.1, 10.0);
    CHECK_FALSE(b.is_exponential());
    CHECK_THROWS_AS(b.exponential_rate(), std::logic_error);
    CHECK(b.mean() == doctest::Approx(0.9 * 1.0 + 0.1 * 10.0));
    CHECK(b.second_moment() == doctest::Approx(0.9 * 2.0 + 0.1 * 200.0));

    const auto d = TaskServiceDist::deterministic(3.0);
    RngStream r(3, 1);
    CHECK(d.sample(r) == 3.0);
    CHECK(d.second_moment() == doctest::Approx(9.0));

    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) sum += b.sample(r);
    CHECK(sum / n == doctest::Approx(b.mean()).epsilon(0.03));

    CHECK_THROWS(TaskServiceDist::exponential(0.0));
    CHECK_THROWS(TaskServiceDist::hyper_exponential({{0.5, 1.0}, {0.4, 2.0}}));
}

TEST_CASE("task count pmf") {
    const auto fixed = TaskCountPmf::fixed(8);
    CHECK(fixed.is_fixed());
    CHECK(fixed.mean() == 8.0);

    const auto mix = TaskCountPmf::from_entries({{16, 0.25}, {2, 0.75}, {5, 0.0}});
    CHECK(mix.entries().size() == 2);
    CHECK(mix.min_k() == 2);
    CHECK(mix.max_k() == 16);
    CHECK(mix.mean() == doctest::Approx(0.75 * 2 + 0.25 * 16));

    RngStream r(5, 2);
    std::map<int, int> counts;
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[mix.sample(r)];
    CHECK(counts.size() == 2);
    CHECK(counts[16] / static_cast<double>(n) == doctest::Approx(0.25).epsilon(0.03));

    CHECK_THROWS(TaskCountPmf::from_entries({{2, 0.5}, {4, 0.4}}));
    CHECK_THROWS(TaskCountPmf::fixed(0));
}

TEST_CASE("config validation reports every issue") {
    SystemConfig sys{4, BarrierMode::OneBarrier, SklPolicy{7}, std::nullopt};
    WorkloadSpec spec{PoissonArrivals{-1.0}, {JobClass{1.0, true, TaskCountPmf::fixed(6), TaskServiceDist::exponential(1.0)}}};
    const auto issues = validate(sys, spec);
    auto mentions = [&](const std::string& needle) {
        return std::any_of(issues.begin(), issues.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
    };
    CHECK(mentions("l <= k"));
    CHECK(mentions("Poisson rate"));
    CHECK(mentions("k=6"));
    CHECK_THROWS_AS(require_valid(sys, spec), ConfigError);

    SystemConfig two{4, BarrierMode::TwoBarrier, std::nullopt, std::nullopt};
    WorkloadSpec mixed{PoissonArrivals{1.0},
                       {JobClass{0.5, true, TaskCountPmf::fixed(2), TaskServiceDist::exponential(1.0)},
                        JobClass{0.5, false, TaskCountPmf::fixed(2), TaskServiceDist::exponential(1.0)}}};
    CHECK(validate(two, mixed).size() == 1);
    two.mode = BarrierMode::OneBarrier;
    CHECK(validate(two, mixed).empty());
}

TEST_CASE("utilization and its inverse") {
    SystemConfig sys{32, BarrierMode::OneBarrier, std::nullopt, std::nullopt};
    std::vector<JobClass> classes{JobClass{0.5, true, TaskCountPmf::fixed(2), TaskServiceDist::exponential(0.5)},
                                  JobClass{0.5, false, TaskCountPmf::fixed(8), TaskServiceDist::exponential(0.5)}};
    const double lambda = arrival_rate_for_utilization(0.7, classes, 32);
    CHECK(lambda == doctest::Approx(0.7 * 32 / (0.5 * 2 * 2 + 0.5 * 8 * 2)));
    WorkloadSpec spec{PoissonArrivals{lambda}, classes};
    CHECK(utilization(spec, sys) == doctest::Approx(0.7));
    WorkloadSpec det{DeterministicArrivals{2.0}, classes};
    CHECK(det.arrival_rate() == 0.5);
    CHECK_THROWS(utilization(det, sys));
}

TEST_CASE("overhead resolution uses the arrival rate by default") {
    SystemConfig sys{4, BarrierMode::OneBarrier, std::nullopt, OverheadConfig{}};
    WorkloadSpec spec{PoissonArrivals{3.0}, {JobClass{}}};
    auto m = resolve_overhead(sys, spec);
    REQUIRE(m);
    CHECK(m->arrival_rate() == 3.0);
    CHECK(m->interval() == RevivePollingModel::kDefaultInterval);
    sys.overhead->arrival_rate = 0.0;
    CHECK(resolve_overhead(sys, spec)->arrival_rate() == 0.0);
    sys.overhead.reset();
    CHECK_FALSE(resolve_overhead(sys, spec));
}

TEST_CASE("job record checks") {
    SystemConfig sys{4, BarrierMode::OneBarrier, SklPolicy{1}, std::nullopt};
    JobRecord rec;
    rec.k = 2;
    rec.arrival = 1.0;
    rec.task_starts = {2.0, 2.0};
    rec.task_finishes = {3.0, 3.0};
    rec.departure = 3.0;
    rec.preempted = 1;
    rec.total_server_time = 2.0;
    rec.useful_server_time = 1.0;
    CHECK(rec.waiting() == 1.0);
    CHECK(rec.sojourn() == 2.0);
    CHECK(validate_record(rec, sys, true).empty());
    rec.task_starts[1] = 2.5;
    CHECK_FALSE(validate_record(rec, sys, true).empty());
}
