#include "barriersim/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace barriersim {

namespace {

constexpr double kProbTolerance = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

TaskServiceDist TaskServiceDist::exponential(double rate) {
    if (!positive_finite(rate)) throw std::invalid_argument("exponential service rate must be > 0");
    return TaskServiceDist(ExponentialService{rate});
}

TaskServiceDist TaskServiceDist::hyper_exponential(std::vector<HyperExponentialService::Branch> branches) {
    if (branches.empty()) throw std::invalid_argument("hyperexponential service needs at least one branch");
    double total = 0.0;
    for (const auto& b : branches) {
        if (!positive_finite(b.rate)) throw std::invalid_argument("hyperexponential branch rate must be > 0");
        if (!(b.prob >= 0.0 && b.prob <= 1.0))
            throw std::invalid_argument("hyperexponential branch probability must lie in [0, 1]");
        total += b.prob;
    }
    if (std::abs(total - 1.0) > kProbTolerance)
        throw std::invalid_argument("hyperexponential branch probabilities must sum to 1");
    return TaskServiceDist(HyperExponentialService{std::move(branches)});
}

TaskServiceDist TaskServiceDist::deterministic(Time value) {
    if (!(std::isfinite(value) && value >= 0.0))
        throw std::invalid_argument("deterministic service time must be finite and >= 0");
    return TaskServiceDist(DeterministicService{value});
}

TaskServiceDist TaskServiceDist::bimodal(double fast_rate, double slow_prob, double slow_factor) {
    if (!positive_finite(slow_factor)) throw std::invalid_argument("slow factor must be > 0");
    return hyper_exponential({{1.0 - slow_prob, fast_rate}, {slow_prob, fast_rate / slow_factor}});
}

double TaskServiceDist::exponential_rate() const {
    if (const auto* e = std::get_if<ExponentialService>(&dist_)) return e->rate;
    throw std::logic_error("service distribution is not exponential");
}

Time TaskServiceDist::mean() const {
    return std::visit(Overloaded{
                          [](const ExponentialService& e) { return 1.0 / e.rate; },
                          [](const HyperExponentialService& h) {
                              double m = 0.0;
                              for (const auto& b : h.branches) m += b.prob / b.rate;
                              return m;
                          },
                          [](const DeterministicService& d) { return d.value; },
                      },
                      dist_);
}

double TaskServiceDist::second_moment() const {
    return std::visit(Overloaded{
                          [](const ExponentialService& e) { return 2.0 / (e.rate * e.rate); },
                          [](const HyperExponentialService& h) {
                              double m = 0.0;
                              for (const auto& b : h.branches) m += 2.0 * b.prob / (b.rate * b.rate);
                              return m;
                          },
                          [](const DeterministicService& d) { return d.value * d.value; },
                      },
                      dist_);
}

Time TaskServiceDist::sample(RngStream& rng) const {
    return std::visit(Overloaded{
                          [&](const ExponentialService& e) { return rng.exponential(e.rate); },
                          [&](const HyperExponentialService& h) {
                              const double u = rng.uniform();
                              double acc = 0.0;
                              for (const auto& b : h.branches) {
                                  acc += b.prob;
                                  if (u < acc) return rng.exponential(b.rate);
                              }
                              return rng.exponential(h.branches.back().rate);
                          },
                          [](const DeterministicService& d) { return d.value; },
                      },
                      dist_);
}

TaskCountPmf::TaskCountPmf(std::vector<Entry> entries) : entries_(std::move(entries)) {
    double acc = 0.0;
    for (const auto& e : entries_) {
        acc += e.prob;
        cumulative_.push_back(acc);
    }
}

TaskCountPmf TaskCountPmf::fixed(int k) {
    if (k < 1) throw std::invalid_argument("task count k must be >= 1");
    return TaskCountPmf({{k, 1.0}});
}

TaskCountPmf TaskCountPmf::from_entries(std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.k < b.k; });
    double total = 0.0;
    std::vector<Entry> kept;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.k < 1) throw std::invalid_argument("task count k must be >= 1");
        if (i > 0 && entries[i - 1].k == e.k) throw std::invalid_argument("duplicate k in task-count pmf");
        if (!(e.prob >= 0.0 && e.prob <= 1.0)) throw std::invalid_argument("pmf probabilities must lie in [0, 1]");
        total += e.prob;
        if (e.prob > 0.0) kept.push_back(e);
    }
    if (kept.empty() || std::abs(total - 1.0) > kProbTolerance)
        throw std::invalid_argument("task-count pmf must sum to 1 (got " + std::to_string(total) + ")");
    return TaskCountPmf(std::move(kept));
}

double TaskCountPmf::mean() const {
    double m = 0.0;
    for (const auto& e : entries_) m += e.k * e.prob;
    return m;
}

int TaskCountPmf::sample(RngStream& rng) const {
    if (entries_.size() == 1) return entries_.front().k;
    const double u = rng.uniform() * cumulative_.back();
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (u < cumulative_[i]) return entries_[i].k;
    return entries_.back().k;
}

}  // namespace barriersim
