#include "barriersim/stability.hpp"

#include <stdexcept>
#include <string>

namespace barriersim {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

double harmonic_difference(int n, int m) {
    require(m >= 0 && n >= m, "harmonic_difference requires n >= m >= 0");
    double sum = 0.0;
    for (int j = n; j > m; --j) sum += 1.0 / j;
    return sum;
}

double harmonic(int n) {
    require(n >= 0, "harmonic requires n >= 0");
    return harmonic_difference(n, 0);
}

double order_stat_mean(int j, int m, double mu) {
    require(j >= 1 && j <= m, "order statistic requires 1 <= j <= m");
    require(mu > 0.0, "rate must be > 0");
    return harmonic_difference(m, m - j) / mu;
}

double order_stat_variance(int j, int m, double mu) {
    require(j >= 1 && j <= m, "order statistic requires 1 <= j <= m");
    require(mu > 0.0, "rate must be > 0");
    double sum = 0.0;
    for (int i = m; i > m - j; --i) sum += 1.0 / (static_cast<double>(i) * i);
    return sum / (mu * mu);
}

double max_util_2barrier(int k) {
    require(k >= 1, "k must be >= 1");
    return 1.0 / harmonic(k);
}

double max_util_1barrier(int s, int k) {
    require(k >= 1, "k must be >= 1");
    require(k <= s, "k must not exceed s");
    return (static_cast<double>(k) / s) / harmonic_difference(s, s - k);
}

TwoBarrierStability two_barrier_stability(int s, int k, double mu) {
    require(k >= 1 && k <= s, "two_barrier_stability requires 1 <= k <= s");
    require(mu > 0.0, "rate must be > 0");
    const int m = s / k;
    const double h = harmonic(k);
    return {m, s % k, m * mu / h, (static_cast<double>(m) * k / s) / h};
}

Skl2BarrierStability skl_2barrier(int s, int k, int l, double mu) {
    require(k >= 1 && k <= s, "skl_2barrier requires 1 <= k <= s");
    require(l >= 1, "l must be >= 1");
    require(l <= k, "l must not exceed k");
    require(mu > 0.0, "rate must be > 0");
    const int m = s / k;
    const double scale = static_cast<double>(m) * k / s;  // exactly 1 when k | s
    const double spacing = harmonic_difference(k, k - l);
    Skl2BarrierStability out{};
    out.k_divides_s = (s % k == 0);
    out.idle_workers = s % k;
    out.lambda_max = m * mu / spacing;
    out.rho_skl = scale * ((static_cast<double>(l) / k) / spacing);
    out.rho_useful = out.rho_skl - scale * (static_cast<double>(k - l) / k);
    return out;
}

double skl_task_throughput(int s, int k, int l) {
    require(k >= 1 && k <= s, "skl_task_throughput requires 1 <= k <= s");
    require(l >= 1 && l <= k, "skl_task_throughput requires 1 <= l <= k");
    return (static_cast<double>(l) / k) / harmonic_difference(k, k - l);
}

JobServerTime expected_job_server_time(int k, int l, double mu) {
    require(l >= 1 && l <= k, "expected_job_server_time requires 1 <= l <= k");
    require(mu > 0.0, "rate must be > 0");
    const double total = l / mu;
    const double useful = (l - (k - l) * harmonic_difference(k, k - l)) / mu;
    return {total, useful};
}

}  // namespace barriersim
