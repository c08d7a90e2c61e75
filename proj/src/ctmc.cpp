#include "barriersim/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include <Eigen/SparseLU>

#include "barriersim/stability.hpp"

namespace barriersim::ctmc {

namespace {

void require_skl(int s, int k, int l) {
    if (!(1 <= l && l <= k && k <= s)) throw std::invalid_argument("ctmc requires 1 <= l <= k <= s");
}

}  // namespace

const char* to_string(RateConvention c) noexcept {
    return c == RateConvention::PerTask ? "per_task" : "literal";
}

int CtmcState::running_tasks() const {
    int t = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) t += (lowest_part + static_cast<int>(i)) * counts[i];
    return t;
}

std::size_t CountsHash::operator()(const std::vector<int>& v) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (int x : v) {
        h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(x));
        h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
}

CapacityError::CapacityError(std::size_t cap)
    : std::runtime_error("ctmc state space exceeds the cap of " + std::to_string(cap) + " states"), cap_(cap) {}

NumericalFailure::NumericalFailure(const std::string& what, double residual)
    : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

std::size_t CtmcModel::index_of(const CtmcState& state) const {
    auto it = index.find(state.counts);
    if (it == index.end()) throw std::out_of_range("state not in the enumerated set");
    return it->second;
}

std::uint64_t count_restricted_partitions(int total, int min_part, int max_part) {
    if (total < 0) return 0;
    if (min_part < 1 || max_part < min_part) throw std::invalid_argument("invalid part range");
    std::vector<std::uint64_t> ways(static_cast<std::size_t>(total) + 1, 0);
    ways[0] = 1;
    for (int part = min_part; part <= max_part; ++part)
        for (int t = part; t <= total; ++t) ways[static_cast<std::size_t>(t)] += ways[static_cast<std::size_t>(t - part)];
    return ways[static_cast<std::size_t>(total)];
}

CtmcState seed_state(int s, int k, int l) {
    require_skl(s, k, l);
    CtmcState st;
    st.lowest_part = k - l + 1;
    st.counts.assign(static_cast<std::size_t>(l), 0);
    st.counts.back() = s / k;
    return st;
}

std::vector<Transition> transitions_from(const CtmcState& state, int s, int k, int l, double mu,
                                         RateConvention convention) {
    const int lowest = k - l + 1;
    const int t = state.running_tasks();
    std::vector<Transition> out;
    for (int r = lowest; r <= k; ++r) {
        const int c = state.count(r);
        if (c == 0) continue;
        const double rate = convention == RateConvention::PerTask ? c * r * mu : c * mu;
        CtmcState next = state;
        auto& counts = next.counts;
        counts[static_cast<std::size_t>(r - lowest)] -= 1;
        int running = t;
        if (r > lowest) {
            counts[static_cast<std::size_t>(r - 1 - lowest)] += 1;
            running -= 1;
        } else {
            // l-th completion: the job departs and its stragglers are preempted
            running -= r;
        }
        int starts = 0;
        while (s - running >= k) {
            counts.back() += 1;
            running += k;
            ++starts;
        }
        if (starts > 1) throw std::logic_error("more than one job start in a single transition");
        out.push_back({std::move(next), rate, starts == 1});
    }
    return out;
}

std::vector<CtmcState> enumerate_states(int s, int k, int l, std::size_t cap) {
    require_skl(s, k, l);
    std::vector<CtmcState> states;
    std::unordered_map<std::vector<int>, std::size_t, CountsHash> seen;
    std::deque<std::size_t> frontier;
    auto visit = [&](const CtmcState& st) {
        if (seen.count(st.counts)) return;
        if (states.size() >= cap) throw CapacityError(cap);
        seen.emplace(st.counts, states.size());
        frontier.push_back(states.size());
        states.push_back(st);
    };
    visit(seed_state(s, k, l));
    while (!frontier.empty()) {
        const std::size_t i = frontier.front();
        frontier.pop_front();
        const CtmcState current = states[i];
        for (const auto& tr : transitions_from(current, s, k, l, 1.0)) visit(tr.target);
    }
    return states;
}

CtmcModel build_generator(std::vector<CtmcState> states, int s, int k, int l, double mu, RateConvention convention) {
    require_skl(s, k, l);
    if (!(mu > 0.0)) throw std::invalid_argument("rate must be > 0");
    CtmcModel model;
    model.s = s;
    model.k = k;
    model.l = l;
    model.mu = mu;
    model.convention = convention;
    model.states = std::move(states);
    const std::size_t n = model.states.size();
    model.index.reserve(n);
    for (std::size_t i = 0; i < n; ++i) model.index.emplace(model.states[i].counts, i);
    if (model.index.size() != n) throw std::invalid_argument("duplicate states");

    std::vector<Eigen::Triplet<double>> triplets;
    model.start_rate.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double exit = 0.0;
        for (const auto& tr : transitions_from(model.states[i], s, k, l, mu, convention)) {
            auto it = model.index.find(tr.target.counts);
            if (it == model.index.end()) throw std::logic_error("transition target outside the enumerated states");
            if (tr.job_start) model.start_rate[i] += tr.rate;
            if (it->second == i) continue;
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(it->second), tr.rate);
            exit += tr.rate;
        }
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), -exit);
    }
    model.generator.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    model.generator.setFromTriplets(triplets.begin(), triplets.end());
    model.generator.makeCompressed();
    return model;
}

double balance_residual(const CtmcModel& model, const std::vector<double>& pi) {
    const Eigen::Map<const Eigen::VectorXd> p(pi.data(), static_cast<Eigen::Index>(pi.size()));
    const Eigen::VectorXd r = model.generator.transpose() * p;
    return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

std::vector<double> solve_steady_state(const CtmcModel& model) {
    const auto n = static_cast<Eigen::Index>(model.states.size());
    if (n == 0) throw std::invalid_argument("empty model");
    if (n == 1) return {1.0};

    Eigen::SparseMatrix<double> a = model.generator.transpose();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(a.nonZeros() + n));
    for (Eigen::Index col = 0; col < a.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(a, col); it; ++it)
            if (it.row() != n - 1) triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (Eigen::Index col = 0; col < n; ++col) triplets.emplace_back(static_cast<int>(n - 1), static_cast<int>(col), 1.0);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw NumericalFailure("sparse LU factorization failed", INFINITY);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    const Eigen::VectorXd x = lu.solve(b);
    if (lu.info() != Eigen::Success) throw NumericalFailure("sparse LU solve failed", INFINITY);

    std::vector<double> pi(x.data(), x.data() + n);
    for (double& p : pi) {
        if (p < -1e-12) throw NumericalFailure("negative steady-state probability", -p);
        p = std::max(p, 0.0);
    }
    const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
    for (double& p : pi) p /= total;
    const double res = balance_residual(model, pi);
    if (!(res < 1e-10)) throw NumericalFailure("steady-state residual too large", res);
    return pi;
}

std::vector<double> solve_power_iteration(const CtmcModel& model, double tolerance, std::size_t max_iterations) {
    const auto n = static_cast<Eigen::Index>(model.states.size());
    if (n == 0) throw std::invalid_argument("empty model");
    double max_exit = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) max_exit = std::max(max_exit, -model.generator.coeff(i, i));
    if (max_exit == 0.0) return std::vector<double>(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
    const double uniform_rate = 1.01 * max_exit;

    // P^T = I + Q^T / Lambda, applied to column vectors
    Eigen::SparseMatrix<double> pt = model.generator.transpose();
    pt /= uniform_rate;
    for (Eigen::Index i = 0; i < n; ++i) pt.coeffRef(i, i) += 1.0;

    Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    Eigen::VectorXd next(n);
    for (std::size_t it = 0; it < max_iterations; ++it) {
        next = pt * p;
        next /= next.sum();
        const double change = (next - p).cwiseAbs().sum();
        p.swap(next);
        if (change < tolerance) return {p.data(), p.data() + n};
    }
    throw NumericalFailure("power iteration did not converge", balance_residual(model, {p.data(), p.data() + n}));
}

double job_start_throughput(const CtmcModel& model, const std::vector<double>& pi) {
    if (pi.size() != model.start_rate.size()) throw std::invalid_argument("pi has the wrong length");
    double sum = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) sum += pi[i] * model.start_rate[i];
    return sum;
}

CtmcModel solve_model(int s, int k, int l, double mu, RateConvention convention, std::size_t cap) {
    CtmcModel model = build_generator(enumerate_states(s, k, l, cap), s, k, l, mu, convention);
    model.pi = solve_steady_state(model);
    model.throughput = job_start_throughput(model, model.pi);
    return model;
}

SklUtilization max_utilization_1barrier_skl(int s, int k, int l, double mu, RateConvention convention,
                                            std::size_t cap) {
    const CtmcModel model = solve_model(s, k, l, mu, convention, cap);
    const JobServerTime job = expected_job_server_time(k, l, mu);
    SklUtilization out{};
    out.throughput = model.throughput;
    out.rho_total = model.throughput * job.total / s;
    out.rho_useful = model.throughput * job.useful / s;
    out.states = model.states.size();
    return out;
}

}  // namespace barriersim::ctmc
