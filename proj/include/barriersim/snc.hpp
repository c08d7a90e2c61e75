#pragma once

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "barriersim/distributions.hpp"

namespace barriersim::snc {

/// A fraction p_bem of the jobs are barrier jobs, the rest non-barrier; all
/// jobs have k tasks.
struct HybridMix {
    double p_bem = 1.0;
    int k = 1;
};

/// All jobs are barrier jobs with a random task count.
struct RandomKMix {
    TaskCountPmf pmf;
};

/// Service process of a 1-barrier system with s workers and Exp(mu) tasks.
struct ServiceProcessSpec {
    int s = 1;
    double mu = 1.0;
    std::variant<HybridMix, RandomKMix> mix = HybridMix{};

    static ServiceProcessSpec bem(int s, double mu, int k);
    static ServiceProcessSpec hybrid(int s, double mu, int k, double p_bem);
    static ServiceProcessSpec random_k(int s, double mu, TaskCountPmf pmf);

    int k_max() const;
    /// (k, p(k)) pairs used to uncondition the sojourn CDF.
    std::vector<TaskCountPmf::Entry> task_counts() const;
    void validate() const;
};

enum class BoundCase { GI, G };

const char* to_string(BoundCase c) noexcept;

/// Poisson arrivals of rate lambda. In the G case the arrival envelope gets
/// an additional burst term sigma_A.
struct ArrivalSpec {
    double lambda = 1.0;
    BoundCase kind = BoundCase::GI;
    double sigma_A = 0.0;
};

class UnstableError : public std::domain_error {
public:
    UnstableError(double mean_interarrival, double mean_service);
    double mean_interarrival() const noexcept { return mean_interarrival_; }
    double mean_service() const noexcept { return mean_service_; }

private:
    double mean_interarrival_;
    double mean_service_;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct EnvelopeParams {
    double theta;
    double rho_A;
    double sigma_A;
    double rho_S;
    /// Only defined for theta < mu; NaN otherwise.
    double sigma_S;
    /// Infinite when the envelope is infeasible.
    double alpha;

    bool feasible() const { return rho_S < rho_A; }
};

struct CurvePoint {
    double tau;
    double cdf;
};

struct BoundResult {
    double theta = 0.0;
    double epsilon = 0.0;
    double tau = 0.0;
    double alpha = 1.0;
    BoundCase kind = BoundCase::GI;
    /// True if any sojourn CDF evaluation switched to numerical convolution.
    bool quadrature_fallback = false;
    std::vector<CurvePoint> curve;
};

/// rho_A(-theta) = -(1/theta) ln E[e^{-theta A}] = ln(1 + theta/lambda) / theta
double rho_A(double theta, double lambda);

/// Upper end of the theta domain: (s - k_max + 1) mu, or s mu without barrier jobs.
double theta_upper(const ServiceProcessSpec& spec);

double log_mgf_Q(double theta, const ServiceProcessSpec& spec);
double mgf_Q(double theta, const ServiceProcessSpec& spec);
double log_mgf_Omega(double theta, const ServiceProcessSpec& spec);
double mgf_Omega(double theta, const ServiceProcessSpec& spec);

/// E[Omega], the rate term of the service envelope as theta -> 0.
double mean_Omega(const ServiceProcessSpec& spec);

EnvelopeParams envelope(double theta, const ArrivalSpec& arrival, const ServiceProcessSpec& spec);

/// Throws UnstableError when 1/lambda <= E[Omega].
void require_stable(const ArrivalSpec& arrival, const ServiceProcessSpec& spec);

/// Supremum of the feasible theta (rho_S(theta) < rho_A(-theta)).
double theta_star(const ArrivalSpec& arrival, const ServiceProcessSpec& spec);

/// Waiting-time (1 - epsilon)-quantile bound. GI: -(1/theta*) ln epsilon. G:
/// -(1/theta) ln(epsilon / alpha(theta)) minimized over the feasible theta.
BoundResult waiting_quantile(double epsilon, const ArrivalSpec& arrival, const ServiceProcessSpec& spec,
                             int grid_points = 512);

/// Lower bound on the waiting CDF at theta: max(0, 1 - alpha e^{-theta tau}).
double waiting_cdf(double tau, double theta, double alpha);

struct CdfValue {
    double value;
    bool used_quadrature;
};

/// Closed-form sojourn CDF given k tasks, GI case (alpha = 1).
double sojourn_cdf_closed_gi(double tau, int k, double mu, double theta);
/// Closed-form sojourn CDF given k tasks, G case.
double sojourn_cdf_closed_g(double tau, int k, double mu, double theta, double alpha);
/// Numerical convolution of the waiting bound with the density of Q given k.
double sojourn_cdf_quadrature(double tau, int k, double mu, double theta, double alpha);

/// Closed form with automatic fallback to quadrature when k > 40 or the
/// alternating sum cancels badly.
CdfValue sojourn_cdf_given_k(double tau, int k, double mu, double theta, double alpha);

/// Unconditioned sojourn CDF lower bound at a fixed theta.
CdfValue sojourn_cdf(double tau, const ArrivalSpec& arrival, const ServiceProcessSpec& spec, double theta);

/// Sojourn (1 - epsilon)-quantile bound minimized over theta.
BoundResult sojourn_quantile(double epsilon, const ArrivalSpec& arrival, const ServiceProcessSpec& spec,
                             int grid_points = 512);

/// Pointwise best lower bound on the sojourn CDF over a theta grid, made
/// nondecreasing by a running maximum.
std::vector<CurvePoint> sojourn_cdf_curve(const std::vector<double>& taus, const ArrivalSpec& arrival,
                                          const ServiceProcessSpec& spec, int grid_points = 64);

/// Waiting CDF lower bound curve at the optimal theta.
std::vector<CurvePoint> waiting_cdf_curve(const std::vector<double>& taus, const ArrivalSpec& arrival,
                                          const ServiceProcessSpec& spec);

}  // namespace barriersim::snc
