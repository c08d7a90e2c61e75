#include "doctest.h"

#include <cmath>

#include "barriersim/stability.hpp"
#include "oracles.hpp"

using namespace barriersim;

namespace {

// E[X_(j)] for m iid Exp(mu): stage i of the race has m - i competitors.
double order_stat_stages(int j, int m, double mu) {
    double t = 0.0;
    for (int i = 0; i < j; ++i) t += 1.0 / ((m - i) * mu);
    return t;
}

}  // namespace

TEST_CASE("harmonic numbers") {
    CHECK(harmonic(0) == 0.0);
    CHECK(harmonic(1) == 1.0);
    for (int n : {2, 5, 16, 100, 1000})
        CHECK(harmonic(n) == doctest::Approx(static_cast<double>(oracle::harmonic(n))).epsilon(1e-14));
    CHECK(harmonic_difference(16, 16) == 0.0);
    CHECK(harmonic_difference(10, 7) == doctest::Approx(1.0 / 8 + 1.0 / 9 + 1.0 / 10).epsilon(1e-15));
    CHECK_THROWS(harmonic(-1));
    CHECK_THROWS(harmonic_difference(3, 4));
}

TEST_CASE("order statistics of exponentials") {
    for (int m : {1, 3, 8, 20})
        for (int j = 1; j <= m; ++j) {
            CHECK(order_stat_mean(j, m, 2.0) == doctest::Approx(order_stat_stages(j, m, 2.0)).epsilon(1e-14));
            double var = 0.0;
            for (int i = 0; i < j; ++i) var += 1.0 / ((m - i) * 2.0 * (m - i) * 2.0);
            CHECK(order_stat_variance(j, m, 2.0) == doctest::Approx(var).epsilon(1e-14));
        }
    CHECK_THROWS(order_stat_mean(0, 3, 1.0));
    CHECK_THROWS(order_stat_mean(4, 3, 1.0));
}

TEST_CASE("two-barrier limit for k = 4 is 12/25") {
    CHECK(std::abs(max_util_2barrier(4) - 0.48) < 1e-15);
    CHECK(max_util_2barrier(1) == 1.0);
}

TEST_CASE("one-barrier limit") {
    const double rho = max_util_1barrier(100, 10);
    CHECK(rho >= 0.950);
    CHECK(rho <= 0.960);
    // s = k reduces to the two-barrier value
    CHECK(max_util_1barrier(16, 16) == doctest::Approx(max_util_2barrier(16)).epsilon(1e-14));
    // k = 1 is an M/M/s queue
    CHECK(max_util_1barrier(7, 1) == doctest::Approx(1.0).epsilon(1e-14));
    for (int s : {4, 8, 32})
        for (int k = 1; k <= s; ++k)
            CHECK(max_util_1barrier(s, k) == doctest::Approx(k / (s * order_stat_stages(k, s, 1.0))).epsilon(1e-13));
}

TEST_CASE("two-barrier stability leaves s mod k workers idle") {
    const auto r = two_barrier_stability(10, 4, 2.0);
    CHECK(r.concurrent_jobs == 2);
    CHECK(r.idle_workers == 2);
    const double h4 = static_cast<double>(oracle::harmonic(4));
    CHECK(r.lambda_max == doctest::Approx(2 * 2.0 / h4).epsilon(1e-14));
    CHECK(r.rho_max == doctest::Approx(0.8 / h4).epsilon(1e-14));
    CHECK_THROWS(two_barrier_stability(3, 4, 1.0));
}

TEST_CASE("(s,k,l) two-barrier closed form") {
    SUBCASE("l = k reduces to the plain two-barrier limit") {
        const auto r = skl_2barrier(16, 16, 16);
        CHECK(r.rho_useful == doctest::Approx(1.0 / static_cast<double>(oracle::harmonic(16))).epsilon(1e-14));
        CHECK(r.rho_skl == doctest::Approx(r.rho_useful).epsilon(1e-15));
    }
    SUBCASE("s = k = 16 values around the crossover") {
        const double ref = 1.0 / static_cast<double>(oracle::harmonic(16));
        CHECK(skl_2barrier(16, 16, 15).rho_useful == doctest::Approx(0.331).epsilon(2e-3));
        CHECK(skl_2barrier(16, 16, 15).rho_useful > ref);
        CHECK(skl_2barrier(16, 16, 9).rho_useful < ref);
        CHECK(skl_2barrier(16, 16, 10).rho_useful > ref);
    }
    SUBCASE("against the order-statistic oracle") {
        for (int k : {2, 5, 16})
            for (int l = 1; l <= k; ++l) {
                const double spacing = order_stat_stages(l, k, 1.0);
                const auto r = skl_2barrier(k, k, l);
                CHECK(r.rho_skl == doctest::Approx((static_cast<double>(l) / k) / spacing).epsilon(1e-13));
                CHECK(r.rho_useful == doctest::Approx(r.rho_skl - static_cast<double>(k - l) / k).epsilon(1e-12));
                CHECK(skl_task_throughput(k, k, l) == doctest::Approx(r.rho_skl).epsilon(1e-13));
            }
    }
    SUBCASE("k not dividing s scales by the busy share") {
        const auto r = skl_2barrier(10, 4, 2, 1.0);
        CHECK_FALSE(r.k_divides_s);
        CHECK(r.idle_workers == 2);
        CHECK(r.rho_skl == doctest::Approx(0.8 * 0.5 / (1.0 / 4 + 1.0 / 3)).epsilon(1e-13));
    }
    CHECK_THROWS(skl_2barrier(16, 16, 17));
    CHECK_THROWS(skl_2barrier(16, 16, 0));
}

TEST_CASE("expected server time per (k,l) job") {
    for (int k : {1, 4, 16})
        for (int l = 1; l <= k; ++l) {
            const double mu = 1.5;
            // each of the k tasks runs until min(own time, X_(l))
            double total = 0.0;
            for (int i = 0; i < l; ++i) total += (k - i) / ((k - i) * mu);
            double useful = 0.0;
            for (int j = 1; j <= l; ++j) useful += order_stat_stages(j, k, mu);
            const auto t = expected_job_server_time(k, l, mu);
            CHECK(t.total == doctest::Approx(total).epsilon(1e-13));
            CHECK(t.total == doctest::Approx(l / mu).epsilon(1e-14));
            CHECK(t.useful == doctest::Approx(useful).epsilon(1e-12));
        }
}
