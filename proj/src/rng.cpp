#include "qdina/rng.hpp"

#include <cmath>

namespace qdina {

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(const std::uint64_t seed) : seed_ {seed}, engine_ {splitmix64(seed)} {}

Rng Rng::child(const std::uint64_t stream) const
{
    return Rng {splitmix64(seed_ ^ splitmix64(stream + 0x632be59bd9b4e019ULL))};
}

double Rng::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(const std::uint64_t n)
{
    // 2^64 mod n; rejecting the top `excess` values leaves a multiple of n
    const std::uint64_t excess = (UINT64_MAX % n + 1) % n;
    for (;;) {
        const auto x = engine_();
        if (x <= UINT64_MAX - excess) return x % n;
    }
}

double Rng::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_normal_ = v * m;
    has_spare_ = true;
    return u * m;
}

} // namespace qdina
