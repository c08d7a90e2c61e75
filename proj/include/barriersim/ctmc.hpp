#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

namespace barriersim::ctmc {

/// How the aggregate completion rate of the c_r jobs with r running tasks is
/// formed. PerTask (c_r r mu) is the default; Literal (c_r mu) exists for
/// comparison only.
enum class RateConvention { PerTask, Literal };

const char* to_string(RateConvention c) noexcept;

/// Backlogged-system state: counts[i] = c_r for r = lowest_part + i, the number
/// of started jobs that still have r tasks running.
struct CtmcState {
    std::vector<int> counts;
    int lowest_part = 1;

    int count(int r) const { return counts[static_cast<std::size_t>(r - lowest_part)]; }
    int highest_part() const { return lowest_part + static_cast<int>(counts.size()) - 1; }
    /// T(S) = sum_r r c_r
    int running_tasks() const;
    bool operator==(const CtmcState& other) const { return counts == other.counts; }
};

struct CountsHash {
    std::size_t operator()(const std::vector<int>& v) const noexcept;
};

class CapacityError : public std::runtime_error {
public:
    CapacityError(std::size_t cap);
    std::size_t cap() const noexcept { return cap_; }

private:
    std::size_t cap_;
};

class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, double residual);
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

struct CtmcModel {
    int s = 0;
    int k = 0;
    int l = 0;
    double mu = 1.0;
    RateConvention convention = RateConvention::PerTask;
    std::vector<CtmcState> states;
    std::unordered_map<std::vector<int>, std::size_t, CountsHash> index;
    /// Row-major generator; self-loops are not stored.
    Eigen::SparseMatrix<double, Eigen::RowMajor> generator;
    /// Total rate of the transitions out of each state that start a job,
    /// self-loops included.
    std::vector<double> start_rate;
    std::vector<double> pi;          ///< empty until solved
    double throughput = 0.0;         ///< job starts per unit time, once solved

    std::size_t index_of(const CtmcState& state) const;
};

inline constexpr std::size_t kDefaultStateCap = 2000000;

/// Number of partitions of `total` into parts from [min_part, max_part].
std::uint64_t count_restricted_partitions(int total, int min_part, int max_part);

/// The seed state (0, ..., 0, floor(s/k)).
CtmcState seed_state(int s, int k, int l);

/// Every state reachable from the seed, in BFS order (seed first).
std::vector<CtmcState> enumerate_states(int s, int k, int l, std::size_t cap = kDefaultStateCap);

struct Transition {
    CtmcState target;
    double rate;
    bool job_start;
};

/// Out-transitions of a state, self-loops included.
std::vector<Transition> transitions_from(const CtmcState& state, int s, int k, int l, double mu,
                                         RateConvention convention = RateConvention::PerTask);

CtmcModel build_generator(std::vector<CtmcState> states, int s, int k, int l, double mu,
                          RateConvention convention = RateConvention::PerTask);

/// Direct sparse solve of pi Q = 0 with one balance equation replaced by the
/// normalization. Throws NumericalFailure if the residual is >= 1e-10.
std::vector<double> solve_steady_state(const CtmcModel& model);

/// Power iteration on the uniformized chain, an independent cross-check.
std::vector<double> solve_power_iteration(const CtmcModel& model, double tolerance = 1e-14,
                                          std::size_t max_iterations = 5000000);

/// ||pi Q||_inf
double balance_residual(const CtmcModel& model, const std::vector<double>& pi);

/// sum_S pi(S) * (rate of job-starting transitions out of S)
double job_start_throughput(const CtmcModel& model, const std::vector<double>& pi);

/// Builds, solves and stores pi and throughput in the model.
CtmcModel solve_model(int s, int k, int l, double mu = 1.0, RateConvention convention = RateConvention::PerTask,
                      std::size_t cap = kDefaultStateCap);

struct SklUtilization {
    double throughput;  ///< jobs per unit time
    double rho_total;   ///< throughput (l / mu) / s
    double rho_useful;  ///< throughput (l - (k-l)(H_k - H_{k-l})) / (mu s)
    std::size_t states;
};

SklUtilization max_utilization_1barrier_skl(int s, int k, int l, double mu = 1.0,
                                            RateConvention convention = RateConvention::PerTask,
                                            std::size_t cap = kDefaultStateCap);

}  // namespace barriersim::ctmc
