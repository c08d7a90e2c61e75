#include "doctest.h"

#include <cmath>
#include <algorithm>
#include <numeric>
#include <set>

#include "barriersim/ctmc.hpp"
#include "barriersim/stability.hpp"
#include "oracles.hpp"

using namespace barriersim;
using namespace barriersim::ctmc;

namespace {

// Reachable configurations by exploring job-level dynamics directly: each
// job is the number of its tasks still running; a completion either lowers
// that number or, at the l-th completion, removes the job. Jobs start
// whenever k workers are free.
std::set<std::vector<int>> reachable_oracle(int s, int k, int l) {
    auto normalize = [&](std::vector<int> jobs) {
        int busy = std::accumulate(jobs.begin(), jobs.end(), 0);
        while (s - busy >= k) {
            jobs.push_back(k);
            busy += k;
        }
        std::sort(jobs.begin(), jobs.end());
        return jobs;
    };
    std::set<std::vector<int>> seen;
    std::vector<std::vector<int>> todo{normalize({})};
    seen.insert(todo.back());
    while (!todo.empty()) {
        const auto jobs = todo.back();
        todo.pop_back();
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            auto next = jobs;
            if (next[i] - 1 >= k - l + 1)
                next[i] -= 1;
            else
                next.erase(next.begin() + static_cast<long>(i));
            next = normalize(next);
            if (seen.insert(next).second) todo.push_back(next);
        }
    }
    // convert to counts per running-task value k-l+1..k
    std::set<std::vector<int>> counts;
    for (const auto& jobs : seen) {
        std::vector<int> c(static_cast<std::size_t>(l), 0);
        for (int r : jobs) ++c[static_cast<std::size_t>(r - (k - l + 1))];
        counts.insert(c);
    }
    return counts;
}

}  // namespace

TEST_CASE("restricted partition counts") {
    for (int total : {0, 1, 5, 12, 20})
        for (int lo : {1, 2, 3})
            for (int hi : {3, 4, 7})
                CHECK(count_restricted_partitions(total, lo, hi) == oracle::partitions_brute(total, lo, hi));
    CHECK(count_restricted_partitions(100, 1, 100) == 190569292ULL);
}

TEST_CASE("seed state fills the workers with whole jobs") {
    const auto st = seed_state(12, 4, 3);
    CHECK(st.lowest_part == 2);
    CHECK(st.counts == std::vector<int>{0, 0, 3});
    CHECK(st.running_tasks() == 12);
    CHECK(st.count(4) == 3);
    CHECK(st.highest_part() == 4);
}

TEST_CASE("state space size") {
    for (int s : {4, 6, 9, 12})
        for (int k = 1; k <= std::min(s, 5); ++k)
            for (int l = 1; l <= k; ++l) {
                CAPTURE(s);
                CAPTURE(k);
                CAPTURE(l);
                std::set<std::vector<int>> got;
                for (const auto& st : enumerate_states(s, k, l)) got.insert(st.counts);
                CHECK(got == reachable_oracle(s, k, l));
            }
    CHECK_THROWS_AS(enumerate_states(32, 8, 8, 10), CapacityError);
}

TEST_CASE("transitions of a small chain") {
    // s=2, k=2, l=1: a single job runs until its first task ends
    auto states = enumerate_states(2, 2, 1);
    REQUIRE(states.size() == 1);
    const auto tr = transitions_from(states[0], 2, 2, 1, 1.5);
    REQUIRE(tr.size() == 1);
    CHECK(tr[0].rate == doctest::Approx(3.0));
    CHECK(tr[0].job_start);
    auto model = solve_model(2, 2, 1, 1.5);
    CHECK(model.throughput == doctest::Approx(3.0).epsilon(1e-12));

    const auto lit = transitions_from(states[0], 2, 2, 1, 1.5, RateConvention::Literal);
    CHECK(lit[0].rate == doctest::Approx(1.5));
}

TEST_CASE("l = k throughput equals the closed form") {
    for (int s : {3, 8, 12, 20})
        for (int k = 1; k <= std::min(s, 6); ++k) {
            const auto m = solve_model(s, k, k, 2.0);
            const double expect = 2.0 / static_cast<double>(oracle::harmonic(s) - oracle::harmonic(s - k));
            CHECK(std::abs(m.throughput - expect) < 1e-9 * expect);
        }
}

TEST_CASE("steady state solvers agree") {
    auto model = build_generator(enumerate_states(10, 4, 2), 10, 4, 2, 1.0);
    const auto lu = solve_steady_state(model);
    const auto pw = solve_power_iteration(model);
    CHECK(std::accumulate(lu.begin(), lu.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(balance_residual(model, lu) < 1e-10);
    for (std::size_t i = 0; i < lu.size(); ++i) CHECK(lu[i] == doctest::Approx(pw[i]).epsilon(1e-8));
    CHECK(job_start_throughput(model, lu) == doctest::Approx(job_start_throughput(model, pw)).epsilon(1e-10));
    for (double p : lu) CHECK(p >= 0.0);
}

TEST_CASE("generator rows conserve probability") {
    auto model = build_generator(enumerate_states(9, 3, 2), 9, 3, 2, 1.0);
    for (std::size_t i = 0; i < model.states.size(); ++i) {
        double out = 0.0;
        for (const auto& t : transitions_from(model.states[i], 9, 3, 2, 1.0)) out += t.rate;
        // every running task completes at rate mu
        CHECK(out == doctest::Approx(model.states[i].running_tasks()));
        CHECK(model.index_of(model.states[i]) == i);
    }
}

TEST_CASE("utilization summary") {
    const auto u = max_utilization_1barrier_skl(12, 4, 3, 1.0);
    CHECK(u.rho_total == doctest::Approx(u.throughput * 3.0 / 12.0).epsilon(1e-14));
    const double useful_per_job = 3.0 - 1.0 * (1.0 / 4 + 1.0 / 3 + 1.0 / 2);
    CHECK(u.rho_useful == doctest::Approx(u.throughput * useful_per_job / 12.0).epsilon(1e-12));
    CHECK(u.rho_total <= 1.0);
    // s = k: the one-barrier chain behaves like the two-barrier closed form
    const auto same = max_utilization_1barrier_skl(8, 8, 5, 1.0);
    CHECK(same.rho_total == doctest::Approx(skl_2barrier(8, 8, 5).rho_skl).epsilon(1e-10));
    CHECK_THROWS(max_utilization_1barrier_skl(4, 5, 1));
    CHECK_THROWS(max_utilization_1barrier_skl(8, 4, 5));
}
