#include "barriersim/rng.hpp"

#include <cmath>

namespace barriersim {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(mix64(mix64(seed) ^ mix64(~stream_id))) {}

RngStream RngStream::split(std::uint64_t child_id) const {
    return RngStream(mix64(seed_ ^ mix64(stream_id_ + 0x51ed27ULL)), child_id);
}

double RngStream::exponential(double rate) {
    // 1 - u lies in (0, 1], so the log is finite.
    return -std::log(1.0 - uniform()) / rate;
}

std::uint64_t RngStream::below(std::uint64_t n) {
    // Lemire-style rejection keeps the result unbiased.
    const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

}  // namespace barriersim
