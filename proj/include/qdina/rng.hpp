#ifndef QDINA_RNG_HPP
#define QDINA_RNG_HPP

#include <cstdint>
#include <random>

namespace qdina {

/// Seedable generator with portable output.
///
/// Raw bits come from std::mt19937_64, whose sequence is fixed by the
/// standard. The conversions to uniform, integer and normal variates are
/// implemented here rather than through std::*_distribution, whose outputs
/// differ between standard libraries.
///
/// Streams: child(k) derives an independent generator from the parent's seed
/// (not its state) by SplitMix64 mixing, so child k is the same no matter how
/// many draws were taken from the parent.
class Rng
{
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    Rng child(std::uint64_t stream) const;

    std::uint64_t bits() { return engine_(); }

    // [0, 1) with 53 random bits.
    double uniform();

    // Uniform integer in [0, n); n > 0. Unbiased (rejection).
    std::uint64_t below(std::uint64_t n);

    // Standard normal via the Marsaglia polar method.
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

} // namespace qdina

#endif
