#pragma once

#include <cstdint>
#include <random>

namespace barriersim {

/// Stream identifiers for the independent stochastic sources of a run.
/// Keeping one stream per source means that changing, say, the overhead
/// model does not perturb the arrival or service sequence.
enum class StreamId : std::uint64_t {
    Arrivals = 1,
    ClassChoice = 2,
    Service = 3,
    Overhead = 4,
};

/// Mixes a 64-bit value (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// A reproducible random stream identified by (seed, stream_id).
///
/// The underlying engine is std::mt19937_64, whose output sequence is fixed by
/// the standard. Variates are derived with explicit formulas rather than the
/// implementation-defined <random> distributions, so a given (seed,
/// stream_id) yields the same draws on every platform.
///
/// Streams are single-owner: they can be moved but not copied. Use split() to
/// derive independent child streams.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);
    RngStream(std::uint64_t seed, StreamId id) : RngStream(seed, static_cast<std::uint64_t>(id)) {}

    RngStream(const RngStream&) = delete;
    RngStream& operator=(const RngStream&) = delete;
    RngStream(RngStream&&) noexcept = default;
    RngStream& operator=(RngStream&&) noexcept = default;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Child stream; depends only on (seed, stream_id, child_id), never on
    /// how many draws this stream has produced.
    RngStream split(std::uint64_t child_id) const;
    RngStream split(StreamId id) const { return split(static_cast<std::uint64_t>(id)); }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Exponential with the given rate; always finite and nonnegative.
    double exponential(double rate);

    /// Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

}  // namespace barriersim
