#pragma once

#include <optional>

namespace barriersim {

/// H_n = sum_{j=1..n} 1/j, summed smallest term first. H_0 = 0.
double harmonic(int n);

/// H_n - H_m = sum_{j=m+1..n} 1/j for n >= m >= 0, summed directly (smallest
/// term first) so the difference keeps full relative precision for large n.
double harmonic_difference(int n, int m);

/// Mean of the j-th smallest of m iid Exp(mu): (H_m - H_{m-j}) / mu.
double order_stat_mean(int j, int m, double mu);

/// Variance of the j-th smallest of m iid Exp(mu), from the independent
/// exponential spacings: sum_{i=m-j+1..m} 1/(i mu)^2.
double order_stat_variance(int j, int m, double mu);

/// 1 / H_k: maximum stable utilization with start and departure barriers
/// when k divides s.
double max_util_2barrier(int k);

/// k / (s (H_s - H_{s-k})): maximum stable utilization with a start barrier only.
double max_util_1barrier(int s, int k);

struct TwoBarrierStability {
    int concurrent_jobs;   ///< m = floor(s / k)
    int idle_workers;      ///< s mod k, permanently idle
    double lambda_max;     ///< m mu / H_k
    double rho_max;        ///< (m k / s) / H_k
};

/// 2-barrier stability for arbitrary s >= k, including k not dividing s.
TwoBarrierStability two_barrier_stability(int s, int k, double mu);

struct Skl2BarrierStability {
    double lambda_max;
    double rho_skl;
    double rho_useful;
    bool k_divides_s;
    int idle_workers;
};

/// (s,k,l) 2-barrier stability. When k does not divide s, lambda_max and both
/// utilizations are scaled by m k / s, m = floor(s / k).
Skl2BarrierStability skl_2barrier(int s, int k, int l, double mu = 1.0);

/// Maximum stable task throughput relative to s for the 2-barrier (s,k,l)
/// system: l / (k (H_k - H_{k-l})).
double skl_task_throughput(int s, int k, int l);

struct JobServerTime {
    double total;
    double useful;
};

/// Expected server time of one (s,k,l) job with Exp(mu) tasks:
/// total = l / mu, useful = (l - (k - l)(H_k - H_{k-l})) / mu.
JobServerTime expected_job_server_time(int k, int l, double mu);

}  // namespace barriersim
