#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>

namespace matrixpower {

/// xoshiro256** stream keyed by (seed, stream id). The 256-bit state is
/// filled by splitmix64 from a mix of both keys, so streams with distinct ids
/// are statistically independent and every replicate of a Monte Carlo run
/// can derive its own stream without coordinating with other threads.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return next(); }

    std::uint64_t next();

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform01();
    /// Standard normal by the Box-Muller transform; the second variate of
    /// each pair is cached and returned by the following call.
    double std_normal();
    bool bernoulli(double p);
    /// Uniform integer on [0, n), by rejection (no modulo bias).
    std::size_t uniform_index(std::size_t n);

    /// Child stream derived from this stream's keys (not its position).
    RngStream substream(std::uint64_t id) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace matrixpower
