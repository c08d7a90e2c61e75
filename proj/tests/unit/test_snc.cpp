#include "doctest.h"

#include <cmath>
#include <random>

#include "barriersim/snc.hpp"
#include "oracles.hpp"

using namespace barriersim;
using namespace barriersim::snc;

namespace {

double bem_mgf_oracle(double theta, int s, int k, double mu) {
    double m = 1.0;
    for (int j = s - k + 1; j <= s; ++j) m *= j * mu / (j * mu - theta);
    return m;
}

}  // namespace

TEST_CASE("arrival envelope rate") {
    for (double lambda : {0.1, 1.0, 7.5})
        for (double theta : {1e-6, 0.3, 2.0, 50.0})
            CHECK(rho_A(theta, lambda) == doctest::Approx(std::log1p(theta / lambda) / theta).epsilon(1e-12));
    // small theta tends to the mean inter-arrival time
    CHECK(rho_A(1e-12, 2.0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK_THROWS_AS(rho_A(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(rho_A(1.0, 0.0), DomainError);
}

TEST_CASE("service increment mgf") {
    const auto bem = ServiceProcessSpec::bem(8, 0.5, 3);
    CHECK(theta_upper(bem) == doctest::Approx(6 * 0.5));
    for (double theta : {0.01, 0.5, 1.2, 2.9})
        CHECK(mgf_Omega(theta, bem) == doctest::Approx(bem_mgf_oracle(theta, 8, 3, 0.5)).epsilon(1e-12));
    CHECK_THROWS_AS(mgf_Omega(3.0, bem), DomainError);

    const auto hyb = ServiceProcessSpec::hybrid(8, 0.5, 3, 0.3);
    for (double theta : {0.01, 0.5, 2.9}) {
        const double nb = std::pow(4.0 / (4.0 - theta), 3);
        CHECK(mgf_Omega(theta, hyb) == doctest::Approx(0.7 * nb + 0.3 * bem_mgf_oracle(theta, 8, 3, 0.5)).epsilon(1e-12));
    }
    const auto none = ServiceProcessSpec::hybrid(8, 0.5, 3, 0.0);
    CHECK(theta_upper(none) == doctest::Approx(4.0));

    const auto mix = ServiceProcessSpec::random_k(8, 0.5, TaskCountPmf::from_entries({{2, 0.4}, {5, 0.6}}));
    CHECK(theta_upper(mix) == doctest::Approx(4 * 0.5));
    for (double theta : {0.1, 1.5})
        CHECK(mgf_Omega(theta, mix) ==
              doctest::Approx(0.4 * bem_mgf_oracle(theta, 8, 2, 0.5) + 0.6 * bem_mgf_oracle(theta, 8, 5, 0.5)).epsilon(1e-12));

    // Q is the maximum of k task times
    double q = 1.0;
    for (int j = 1; j <= 3; ++j) q *= j * 0.5 / (j * 0.5 - 0.2);
    CHECK(mgf_Q(0.2, bem) == doctest::Approx(q).epsilon(1e-12));
    CHECK_THROWS_AS(mgf_Q(0.5, bem), DomainError);
}

TEST_CASE("mean service increment is the mgf slope at zero") {
    for (const auto& spec : {ServiceProcessSpec::bem(16, 1.0, 8), ServiceProcessSpec::hybrid(16, 2.0, 4, 0.4),
                             ServiceProcessSpec::random_k(16, 1.0, TaskCountPmf::from_entries({{2, 0.5}, {16, 0.5}}))}) {
        const double h = 1e-6;
        CHECK(mean_Omega(spec) == doctest::Approx(log_mgf_Omega(h, spec) / h).epsilon(1e-5));
    }
    const auto bem = ServiceProcessSpec::bem(10, 1.0, 3);
    CHECK(mean_Omega(bem) == doctest::Approx(1.0 / 10 + 1.0 / 9 + 1.0 / 8).epsilon(1e-14));
}

TEST_CASE("stability boundary") {
    const auto spec = ServiceProcessSpec::bem(10, 1.0, 3);
    const double lambda_max = 1.0 / mean_Omega(spec);
    CHECK_THROWS_AS(theta_star({lambda_max, BoundCase::GI, 0.0}, spec), UnstableError);
    CHECK_THROWS_AS(theta_star({2.0 * lambda_max, BoundCase::GI, 0.0}, spec), UnstableError);
    const double t = theta_star({0.99 * lambda_max, BoundCase::GI, 0.0}, spec);
    CHECK(t > 0.0);
    CHECK(t < theta_upper(spec));
    try {
        theta_star({lambda_max * 1.5, BoundCase::GI, 0.0}, spec);
    } catch (const UnstableError& e) {
        CHECK(e.mean_interarrival() == doctest::Approx(1.0 / (1.5 * lambda_max)));
        CHECK(e.mean_service() == doctest::Approx(mean_Omega(spec)));
    }
}

TEST_CASE("M/M/1 reduction") {
    const auto spec = ServiceProcessSpec::bem(1, 1.0, 1);
    for (double lambda : {0.2, 0.5, 0.9}) {
        const ArrivalSpec a{lambda, BoundCase::GI, 0.0};
        const double ts = theta_star(a, spec);
        CHECK(std::abs(ts - (1.0 - lambda)) < 1e-6);
        for (double eps : {1e-2, 1e-6}) {
            const auto w = waiting_quantile(eps, a, spec);
            CHECK(w.tau == doctest::Approx(-std::log(eps) / ts).epsilon(1e-12));
            // exact M/M/1: P(W > t) = rho e^{-(mu - lambda) t}, P(T > t) = e^{-(mu - lambda) t}
            CHECK(lambda * std::exp(-(1.0 - lambda) * w.tau) <= eps * (1 + 1e-9));
            const auto sj = sojourn_quantile(eps, a, spec);
            CHECK(sj.tau >= -std::log(eps) / (1.0 - lambda) * (1 - 1e-9));
        }
    }
}

TEST_CASE("envelope parameters") {
    const auto spec = ServiceProcessSpec::bem(16, 1.0, 4);
    const ArrivalSpec gi{3.0, BoundCase::GI, 0.0};
    const ArrivalSpec g{3.0, BoundCase::G, 0.5};
    const double theta = 0.5 * theta_star(gi, spec);
    const auto e1 = envelope(theta, gi, spec);
    const auto e2 = envelope(theta, g, spec);
    CHECK(e1.feasible());
    CHECK(e1.alpha == 1.0);
    CHECK(e1.sigma_A == 0.0);
    CHECK(e2.sigma_A == 0.5);
    CHECK(e2.alpha == doctest::Approx(std::exp(theta * 0.5) / (1.0 - std::exp(-theta * (e2.rho_A - e2.rho_S)))));
    CHECK(e2.alpha > 1.0);
    const auto bad = envelope(0.999 * theta_upper(spec), gi, spec);
    CHECK_FALSE(bad.feasible());
    CHECK(std::isinf(bad.alpha));
    CHECK(std::isnan(envelope(1.5, gi, spec).sigma_S));

    // the G case pays for its prefactor
    CHECK(waiting_quantile(1e-3, g, spec).tau > waiting_quantile(1e-3, gi, spec).tau);
    CHECK(sojourn_quantile(1e-3, g, spec).tau > sojourn_quantile(1e-3, gi, spec).tau);
}

TEST_CASE("sojourn closed form matches the convolution oracle") {
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<int> kd(1, 16);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    int checked = 0;
    while (checked < 60) {
        const int k = kd(gen);
        const double mu = 0.25 + 2.0 * u01(gen);
        const double theta = mu * (0.05 + 3.0 * u01(gen));
        bool near = false;
        for (int i = 1; i <= k; ++i) near = near || std::abs(theta - i * mu) < 1e-3 * i * mu;
        if (near) continue;
        const double tau = (0.05 + 6.0 * u01(gen)) * static_cast<double>(oracle::harmonic(k)) / mu;
        const double alpha = 1.0 + 4.0 * u01(gen);
        CHECK(sojourn_cdf_closed_gi(tau, k, mu, theta) ==
              doctest::Approx(oracle::sojourn_convolution(tau, k, mu, theta, 1.0)).epsilon(1e-8).scale(1.0));
        CHECK(sojourn_cdf_closed_g(tau, k, mu, theta, alpha) ==
              doctest::Approx(oracle::sojourn_convolution(tau, k, mu, theta, alpha)).epsilon(1e-8).scale(1.0));
        CHECK(sojourn_cdf_closed_g(tau, k, mu, theta, 1.0) == sojourn_cdf_closed_gi(tau, k, mu, theta));
        CHECK(sojourn_cdf_quadrature(tau, k, mu, theta, alpha) ==
              doctest::Approx(sojourn_cdf_closed_g(tau, k, mu, theta, alpha)).epsilon(1e-9).scale(1.0));
        ++checked;
    }
}

TEST_CASE("sojourn cdf edge cases") {
    CHECK(sojourn_cdf_closed_gi(0.0, 4, 1.0, 0.5) == 0.0);
    CHECK(sojourn_cdf_closed_gi(-1.0, 4, 1.0, 0.5) == 0.0);
    CHECK(sojourn_cdf_closed_g(0.1, 4, 1.0, 0.5, 2.0) == 0.0);  // below ln(alpha)/theta
    CHECK_THROWS_AS(sojourn_cdf_closed_gi(1.0, 4, 1.0, 2.0), DomainError);  // pole at 2 mu
    CHECK_THROWS_AS(sojourn_cdf_closed_g(1.0, 4, 1.0, 0.5, 0.5), DomainError);
    CHECK(sojourn_cdf_closed_gi(200.0, 8, 1.0, 0.3) == doctest::Approx(1.0).epsilon(1e-12));

    // large k goes through quadrature
    const auto big = sojourn_cdf_given_k(30.0, 64, 1.0, 0.4, 1.0);
    CHECK(big.used_quadrature);
    CHECK(big.value == doctest::Approx(oracle::sojourn_convolution(30.0, 64, 1.0, 0.4, 1.0)).epsilon(1e-7).scale(1.0));
    const auto small = sojourn_cdf_given_k(3.0, 4, 1.0, 0.4, 1.0);
    CHECK_FALSE(small.used_quadrature);
}

TEST_CASE("cdf curves are monotone and consistent with the quantiles") {
    const auto spec = ServiceProcessSpec::random_k(32, 1.0, TaskCountPmf::from_entries({{2, 0.5}, {8, 0.5}}));
    const ArrivalSpec a{4.0, BoundCase::GI, 0.0};
    std::vector<double> taus;
    for (int i = 0; i <= 60; ++i) taus.push_back(0.25 * i);
    const auto soj = sojourn_cdf_curve(taus, a, spec);
    const auto wait = waiting_cdf_curve(taus, a, spec);
    REQUIRE(soj.size() == taus.size());
    for (std::size_t i = 1; i < soj.size(); ++i) {
        CHECK(soj[i].cdf >= soj[i - 1].cdf);
        CHECK(wait[i].cdf >= wait[i - 1].cdf);
        CHECK(soj[i].cdf <= wait[i].cdf + 1e-12);
    }
    const auto q = sojourn_quantile(1e-2, a, spec);
    // the quantile is where some theta's CDF first reaches 1 - eps
    CHECK(sojourn_cdf(q.tau * 1.0001, a, spec, q.theta).value >= 0.99 - 1e-9);
    CHECK_THROWS(sojourn_cdf_curve({2.0, 1.0}, a, spec));
}

TEST_CASE("hybrid and random-k specs reduce to BEM") {
    const ArrivalSpec a{2.0, BoundCase::GI, 0.0};
    const auto bem = ServiceProcessSpec::bem(16, 1.0, 4);
    const auto hyb = ServiceProcessSpec::hybrid(16, 1.0, 4, 1.0);
    const auto rk = ServiceProcessSpec::random_k(16, 1.0, TaskCountPmf::fixed(4));
    CHECK(theta_star(a, hyb) == theta_star(a, bem));
    CHECK(theta_star(a, rk) == doctest::Approx(theta_star(a, bem)).epsilon(1e-12));
    CHECK(sojourn_quantile(1e-3, a, rk).tau == doctest::Approx(sojourn_quantile(1e-3, a, bem).tau).epsilon(1e-9));
    CHECK_THROWS(ServiceProcessSpec::hybrid(16, 1.0, 4, 1.5));
    CHECK_THROWS(ServiceProcessSpec::bem(4, 1.0, 5));
}
