#include "barriersim/snc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/binomial.hpp>

#include "barriersim/stability.hpp"

namespace barriersim::snc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPoleGuard = 1e-9;
constexpr int kClosedFormMaxK = 40;
constexpr double kCancellationLimit = 1e8;

void require_theta(double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("theta must be finite and > 0");
}

/// ln prod_{j=lo..hi} j mu / (j mu - theta)
double log_product(int lo, int hi, double mu, double theta) {
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) sum -= std::log1p(-theta / (j * mu));
    return sum;
}

/// ln sum_i p_i e^{L_i}, for weights summing to one, accurate when all L_i are small.
double log_mixture(const std::vector<std::pair<double, double>>& weighted_logs) {
    double max_log = -kInf;
    for (const auto& [p, l] : weighted_logs)
        if (p > 0.0) max_log = std::max(max_log, l);
    if (max_log < 30.0) {
        double acc = 0.0;
        for (const auto& [p, l] : weighted_logs)
            if (p > 0.0) acc += p * std::expm1(l);
        return std::log1p(acc);
    }
    double acc = 0.0;
    for (const auto& [p, l] : weighted_logs)
        if (p > 0.0) acc += p * std::exp(l - max_log);
    return max_log + std::log(acc);
}

/// Neumaier compensated sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
        max_partial_ = std::max(max_partial_, std::abs(sum_ + comp_));
    }
    double value() const { return sum_ + comp_; }
    double max_partial() const { return max_partial_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
    double max_partial_ = 0.0;
};

void check_poles(int k, double mu, double theta) {
    for (int i = 0; i < k; ++i) {
        const double a = (i + 1) * mu;
        if (std::abs(theta - a) <= kPoleGuard * a)
            throw DomainError("theta coincides with the excluded pole " + std::to_string(a));
    }
}

bool near_pole(int k_max, double mu, double theta) {
    for (int i = 0; i < k_max; ++i) {
        const double a = (i + 1) * mu;
        if (std::abs(theta - a) <= kPoleGuard * a) return true;
    }
    return false;
}

/// e^{-theta u} - e^{-a u} without overflow or cancellation.
double exp_difference(double theta, double a, double u) {
    if (a > theta) return std::exp(-theta * u) * -std::expm1(-(a - theta) * u);
    return std::exp(-a * u) * std::expm1((a - theta) * u);
}

struct ClosedForm {
    double value;
    double max_partial;
};

/// Closed form of int_0^u (1 - e^{-theta (u - x)}) f_Q(x) dx.
ClosedForm closed_form_kernel(double u, int k, double mu, double theta) {
    CompensatedSum sum;
    for (int i = 0; i < k; ++i) {
        const double a = (i + 1) * mu;
        const double binom = boost::math::binomial_coefficient<double>(static_cast<unsigned>(k - 1), static_cast<unsigned>(i));
        const double bracket = -std::expm1(-a * u) / (i + 1) - mu * exp_difference(theta, a, u) / (a - theta);
        sum.add((i % 2 == 0 ? 1.0 : -1.0) * binom * bracket);
    }
    return {k * sum.value(), k * sum.max_partial()};
}

ClosedForm closed_form_gi(double tau, int k, double mu, double theta) {
    if (tau <= 0.0) return {0.0, 0.0};
    return closed_form_kernel(tau, k, mu, theta);
}

ClosedForm closed_form_g(double tau, int k, double mu, double theta, double alpha) {
    // F_W is zero below ln(alpha)/theta; past that point the waiting bound is
    // the GI bound shifted, so the alpha^{a/theta} e^{-a tau} factors become
    // e^{-a u} with u = tau - ln(alpha)/theta.
    const double u = tau - std::log(alpha) / theta;
    if (u <= 0.0) return {0.0, 0.0};
    return closed_form_kernel(u, k, mu, theta);
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

void validate_pmf_range(const TaskCountPmf& pmf, int s) {
    if (pmf.min_k() < 1 || pmf.max_k() > s) throw std::invalid_argument("task counts must lie in [1, s]");
}

}  // namespace

const char* to_string(BoundCase c) noexcept { return c == BoundCase::GI ? "GI" : "G"; }

// --- spec -------------------------------------------------------------------

ServiceProcessSpec ServiceProcessSpec::bem(int s, double mu, int k) { return hybrid(s, mu, k, 1.0); }

ServiceProcessSpec ServiceProcessSpec::hybrid(int s, double mu, int k, double p_bem) {
    ServiceProcessSpec spec{s, mu, HybridMix{p_bem, k}};
    spec.validate();
    return spec;
}

ServiceProcessSpec ServiceProcessSpec::random_k(int s, double mu, TaskCountPmf pmf) {
    ServiceProcessSpec spec{s, mu, RandomKMix{std::move(pmf)}};
    spec.validate();
    return spec;
}

int ServiceProcessSpec::k_max() const {
    if (const auto* h = std::get_if<HybridMix>(&mix)) return h->k;
    return std::get<RandomKMix>(mix).pmf.max_k();
}

std::vector<TaskCountPmf::Entry> ServiceProcessSpec::task_counts() const {
    if (const auto* h = std::get_if<HybridMix>(&mix)) return {{h->k, 1.0}};
    return std::get<RandomKMix>(mix).pmf.entries();
}

void ServiceProcessSpec::validate() const {
    if (s < 1) throw std::invalid_argument("s must be >= 1");
    if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("mu must be > 0");
    if (const auto* h = std::get_if<HybridMix>(&mix)) {
        if (!(h->p_bem >= 0.0 && h->p_bem <= 1.0)) throw std::invalid_argument("p_bem must lie in [0, 1]");
        if (h->k < 1 || h->k > s) throw std::invalid_argument("k must lie in [1, s]");
    } else {
        validate_pmf_range(std::get<RandomKMix>(mix).pmf, s);
    }
}

UnstableError::UnstableError(double mean_interarrival, double mean_service)
    : std::domain_error("unstable: the mean inter-arrival time " + std::to_string(mean_interarrival) +
                        " does not exceed the mean service increment E[Omega] = " + std::to_string(mean_service) +
                        ", so no theta satisfies rho_S(theta) < rho_A(-theta)"),
      mean_interarrival_(mean_interarrival),
      mean_service_(mean_service) {}

// --- envelopes --------------------------------------------------------------

double rho_A(double theta, double lambda) {
    require_theta(theta);
    if (!(lambda > 0.0)) throw DomainError("arrival rate must be > 0");
    return std::log1p(theta / lambda) / theta;
}

double theta_upper(const ServiceProcessSpec& spec) {
    if (const auto* h = std::get_if<HybridMix>(&spec.mix); h && h->p_bem == 0.0) return spec.s * spec.mu;
    return (spec.s - spec.k_max() + 1) * spec.mu;
}

double log_mgf_Q(double theta, const ServiceProcessSpec& spec) {
    require_theta(theta);
    if (theta >= spec.mu) throw DomainError("mgf_Q requires theta < mu");
    std::vector<std::pair<double, double>> terms;
    for (const auto& e : spec.task_counts()) terms.emplace_back(e.prob, log_product(1, e.k, spec.mu, theta));
    return log_mixture(terms);
}

double mgf_Q(double theta, const ServiceProcessSpec& spec) { return std::exp(log_mgf_Q(theta, spec)); }

double log_mgf_Omega(double theta, const ServiceProcessSpec& spec) {
    require_theta(theta);
    if (theta >= theta_upper(spec)) throw DomainError("mgf_Omega requires theta < (s - k_max + 1) mu");
    const int s = spec.s;
    std::vector<std::pair<double, double>> terms;
    if (const auto* h = std::get_if<HybridMix>(&spec.mix)) {
        if (h->p_bem < 1.0) terms.emplace_back(1.0 - h->p_bem, -h->k * std::log1p(-theta / (s * spec.mu)));
        if (h->p_bem > 0.0) terms.emplace_back(h->p_bem, log_product(s - h->k + 1, s, spec.mu, theta));
    } else {
        for (const auto& e : std::get<RandomKMix>(spec.mix).pmf.entries())
            terms.emplace_back(e.prob, log_product(s - e.k + 1, s, spec.mu, theta));
    }
    return log_mixture(terms);
}

double mgf_Omega(double theta, const ServiceProcessSpec& spec) { return std::exp(log_mgf_Omega(theta, spec)); }

double mean_Omega(const ServiceProcessSpec& spec) {
    const int s = spec.s;
    if (const auto* h = std::get_if<HybridMix>(&spec.mix)) {
        return (1.0 - h->p_bem) * h->k / (s * spec.mu) + h->p_bem * harmonic_difference(s, s - h->k) / spec.mu;
    }
    double mean = 0.0;
    for (const auto& e : std::get<RandomKMix>(spec.mix).pmf.entries())
        mean += e.prob * harmonic_difference(s, s - e.k) / spec.mu;
    return mean;
}

EnvelopeParams envelope(double theta, const ArrivalSpec& arrival, const ServiceProcessSpec& spec) {
    EnvelopeParams p{};
    p.theta = theta;
    p.rho_A = rho_A(theta, arrival.lambda);
    p.sigma_A = arrival.kind == BoundCase::GI ? 0.0 : arrival.sigma_A;
    const double log_omega = log_mgf_Omega(theta, spec);
    p.rho_S = log_omega / theta;
    p.sigma_S = theta < spec.mu ? (log_mgf_Q(theta, spec) - log_omega) / theta
                                : std::numeric_limits<double>::quiet_NaN();
    if (!p.feasible()) {
        p.alpha = kInf;
    } else if (arrival.kind == BoundCase::GI) {
        p.alpha = 1.0;
    } else {
        p.alpha = std::exp(theta * p.sigma_A) / -std::expm1(-theta * (p.rho_A - p.rho_S));
    }
    return p;
}

void require_stable(const ArrivalSpec& arrival, const ServiceProcessSpec& spec) {
    spec.validate();
    if (!(arrival.lambda > 0.0)) throw DomainError("arrival rate must be > 0");
    const double interarrival = 1.0 / arrival.lambda;
    const double service = mean_Omega(spec);
    if (interarrival <= service) throw UnstableError(interarrival, service);
}

double theta_star(const ArrivalSpec& arrival, const ServiceProcessSpec& spec) {
    require_stable(arrival, spec);
    auto gap = [&](double theta) { return rho_A(theta, arrival.lambda) - log_mgf_Omega(theta, spec) / theta; };
    double lo = 0.0;
    double hi = theta_upper(spec);
    // gap(0+) > 0 when stable and gap -> -inf toward the upper end
    for (int it = 0; it < 400 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (gap(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    if (!(lo > 0.0)) throw UnstableError(1.0 / arrival.lambda, mean_Omega(spec));
    return lo;
}

// --- waiting ----------------------------------------------------------------

double waiting_cdf(double tau, double theta, double alpha) {
    if (tau < 0.0) return 0.0;
    return std::max(0.0, 1.0 - alpha * std::exp(-theta * tau));
}

namespace {

/// Log-spaced grid on (0, upper], ending exactly at upper.
std::vector<double> theta_grid(double upper, int points) {
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(points));
    const double lo = std::log(upper * 1e-6);
    const double hi = std::log(upper);
    for (int i = 0; i < points; ++i) grid.push_back(std::exp(lo + (hi - lo) * (i + 1) / points));
    grid.back() = upper;
    return grid;
}

/// Grid minimum followed by golden-section refinement between the neighbors.
template <class F>
std::pair<double, double> minimize_on_grid(const std::vector<double>& grid, F objective) {
    std::size_t best = 0;
    double best_value = kInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = objective(grid[i]);
        if (v < best_value) {
            best_value = v;
            best = i;
        }
    }
    if (!std::isfinite(best_value)) return {grid[best], best_value};
    double a = best > 0 ? grid[best - 1] : grid[best] * 0.5;
    double b = best + 1 < grid.size() ? grid[best + 1] : grid[best];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = objective(c), fd = objective(d);
    for (int it = 0; it < 80 && b - a > 1e-12 * b; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = objective(d);
        }
    }
    double theta = grid[best];
    double value = best_value;
    if (fc < value) theta = c, value = fc;
    if (fd < value) theta = d, value = fd;
    return {theta, value};
}

void require_epsilon(double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must lie in (0, 1]");
}

}  // namespace

BoundResult waiting_quantile(double epsilon, const ArrivalSpec& arrival, const ServiceProcessSpec& spec,
                             int grid_points) {
    require_epsilon(epsilon);
    const double star = theta_star(arrival, spec);
    BoundResult r;
    r.epsilon = epsilon;
    r.kind = arrival.kind;
    if (arrival.kind == BoundCase::GI) {
        r.theta = star;
        r.alpha = 1.0;
        r.tau = -std::log(epsilon) / star;
        return r;
    }
    auto objective = [&](double theta) {
        if (theta <= 0.0 || theta >= star) return kInf;
        const EnvelopeParams env = envelope(theta, arrival, spec);
        if (!env.feasible()) return kInf;
        return std::max(0.0, (std::log(env.alpha) - std::log(epsilon)) / theta);
    };
    auto grid = theta_grid(star, grid_points);
    grid.back() = star * (1.0 - 1e-9);
    const auto [theta, tau] = minimize_on_grid(grid, objective);
    if (!std::isfinite(tau)) throw UnstableError(1.0 / arrival.lambda, mean_Omega(spec));
    r.theta = theta;
    r.tau = tau;
    r.alpha = envelope(theta, arrival, spec).alpha;
    return r;
}

std::vector<CurvePoint> waiting_cdf_curve(const std::vector<double>& taus, const ArrivalSpec& arrival,
                                          const ServiceProcessSpec& spec) {
    if (!std::is_sorted(taus.begin(), taus.end())) throw std::invalid_argument("tau values must be sorted");
    std::vector<CurvePoint> curve;
    curve.reserve(taus.size());
    if (arrival.kind == BoundCase::GI) {
        const double star = theta_star(arrival, spec);
        for (double t : taus) curve.push_back({t, waiting_cdf(t, star, 1.0)});
    } else {
        const double star = theta_star(arrival, spec);
        auto grid = theta_grid(star, 64);
        grid.back() = star * (1.0 - 1e-9);
        for (double t : taus) {
            double best = 0.0;
            for (double theta : grid) best = std::max(best, waiting_cdf(t, theta, envelope(theta, arrival, spec).alpha));
            curve.push_back({t, best});
        }
    }
    double running = 0.0;
    for (auto& p : curve) p.cdf = running = std::max(running, p.cdf);
    return curve;
}

// --- sojourn ----------------------------------------------------------------

double sojourn_cdf_closed_gi(double tau, int k, double mu, double theta) {
    require_theta(theta);
    if (k < 1) throw DomainError("k must be >= 1");
    check_poles(k, mu, theta);
    return closed_form_gi(tau, k, mu, theta).value;
}

double sojourn_cdf_closed_g(double tau, int k, double mu, double theta, double alpha) {
    require_theta(theta);
    if (k < 1) throw DomainError("k must be >= 1");
    if (!(alpha >= 1.0)) throw DomainError("alpha must be >= 1");
    check_poles(k, mu, theta);
    return closed_form_g(tau, k, mu, theta, alpha).value;
}

double sojourn_cdf_quadrature(double tau, int k, double mu, double theta, double alpha) {
    require_theta(theta);
    if (k < 1) throw DomainError("k must be >= 1");
    const double shift = std::log(alpha) / theta;
    const double u = tau - shift;
    if (u <= 0.0) return 0.0;
    const double upper = std::min(u, (std::log(static_cast<double>(k)) + 40.0) / mu);
    auto integrand = [&](double x) {
        const double e = std::exp(-mu * x);
        const double density = k * mu * e * std::pow(-std::expm1(-mu * x), k - 1);
        return -std::expm1(-theta * (u - x)) * density;
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, upper, 20, 1e-14);
}

CdfValue sojourn_cdf_given_k(double tau, int k, double mu, double theta, double alpha) {
    require_theta(theta);
    if (k < 1) throw DomainError("k must be >= 1");
    check_poles(k, mu, theta);
    if (k <= kClosedFormMaxK) {
        const ClosedForm cf = alpha == 1.0 ? closed_form_gi(tau, k, mu, theta) : closed_form_g(tau, k, mu, theta, alpha);
        const bool cancelled = cf.max_partial > kCancellationLimit * std::abs(cf.value);
        if (!cancelled && cf.value >= -1e-12) return {clamp01(cf.value), false};
    }
    return {clamp01(sojourn_cdf_quadrature(tau, k, mu, theta, alpha)), true};
}

CdfValue sojourn_cdf(double tau, const ArrivalSpec& arrival, const ServiceProcessSpec& spec, double theta) {
    const EnvelopeParams env = envelope(theta, arrival, spec);
    if (!env.feasible()) throw DomainError("theta is not feasible for this arrival rate");
    CdfValue out{0.0, false};
    for (const auto& e : spec.task_counts()) {
        const CdfValue v = sojourn_cdf_given_k(tau, e.k, spec.mu, theta, env.alpha);
        out.value += e.prob * v.value;
        out.used_quadrature = out.used_quadrature || v.used_quadrature;
    }
    out.value = clamp01(out.value);
    return out;
}

namespace {

struct SojournSearch {
    const ArrivalSpec& arrival;
    const ServiceProcessSpec& spec;
    double epsilon;
    bool fallback = false;

    /// Smallest tau with 1 - F_T(tau) <= epsilon at this theta; +inf if the
    /// theta is unusable.
    double tau_at(double theta) {
        if (near_pole(spec.k_max(), spec.mu, theta)) return kInf;
        const EnvelopeParams env = envelope(theta, arrival, spec);
        if (!env.feasible() || !std::isfinite(env.alpha)) return kInf;
        auto tail = [&](double tau) {
            double f = 0.0;
            for (const auto& e : spec.task_counts()) {
                const CdfValue v = sojourn_cdf_given_k(tau, e.k, spec.mu, theta, env.alpha);
                fallback = fallback || v.used_quadrature;
                f += e.prob * v.value;
            }
            return 1.0 - std::min(f, 1.0);
        };
        double lo = std::log(env.alpha) / theta;
        double hi = std::max(lo, 0.0) + 1.0 / theta + harmonic(spec.k_max()) / spec.mu;
        int doublings = 0;
        while (tail(hi) > epsilon) {
            hi *= 2.0;
            if (++doublings > 200) return kInf;
        }
        lo = std::max(lo, 0.0);
        for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (tail(mid) > epsilon)
                lo = mid;
            else
                hi = mid;
        }
        return hi;
    }
};

}  // namespace

BoundResult sojourn_quantile(double epsilon, const ArrivalSpec& arrival, const ServiceProcessSpec& spec,
                             int grid_points) {
    require_epsilon(epsilon);
    const double star = theta_star(arrival, spec);
    SojournSearch search{arrival, spec, epsilon};
    auto grid = theta_grid(star, grid_points);
    if (arrival.kind == BoundCase::G) grid.back() = star * (1.0 - 1e-9);
    const auto [theta, tau] = minimize_on_grid(grid, [&](double t) { return t > star ? kInf : search.tau_at(t); });
    if (!std::isfinite(tau)) throw DomainError("no theta on the search grid yields a finite sojourn bound");
    BoundResult r;
    r.epsilon = epsilon;
    r.kind = arrival.kind;
    r.theta = theta;
    r.tau = tau;
    r.alpha = envelope(theta, arrival, spec).alpha;
    r.quadrature_fallback = search.fallback;
    return r;
}

std::vector<CurvePoint> sojourn_cdf_curve(const std::vector<double>& taus, const ArrivalSpec& arrival,
                                          const ServiceProcessSpec& spec, int grid_points) {
    if (!std::is_sorted(taus.begin(), taus.end())) throw std::invalid_argument("tau values must be sorted");
    const double star = theta_star(arrival, spec);
    auto grid = theta_grid(star, grid_points);
    if (arrival.kind == BoundCase::G) grid.back() = star * (1.0 - 1e-9);
    std::vector<CurvePoint> curve;
    curve.reserve(taus.size());
    for (double t : taus) curve.push_back({t, 0.0});
    for (double theta : grid) {
        if (near_pole(spec.k_max(), spec.mu, theta)) continue;
        for (auto& p : curve) p.cdf = std::max(p.cdf, sojourn_cdf(p.tau, arrival, spec, theta).value);
    }
    double running = 0.0;
    for (auto& p : curve) p.cdf = running = std::max(running, p.cdf);
    return curve;
}

}  // namespace barriersim::snc
