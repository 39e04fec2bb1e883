#pragma once

#include <cstdint>
#include <vector>

namespace retina {

/// Deterministic 64-bit pseudorandom generator with explicit integer state.
///
/// State transition (xorshift64*):
///
///     s ^= s >> 12;
///     s ^= s << 25;
///     s ^= s >> 27;
///     output = s * 0x2545F4914F6CDD1D
///
/// The seed is mixed once through a splitmix64 step before use so that small
/// or zero seeds (xorshift cannot hold state 0) still give well-spread
/// states. The whole construction is pure integer arithmetic, so identical
/// seeds produce identical sequences on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept;

    /// Advances the state and returns the next 64-bit word.
    std::uint64_t next_u64() noexcept;

    /// Next double in [0, 1), built from the top 53 bits of next_u64().
    double next_double() noexcept;

    /// Next double in [lo, hi). Throws ValueError unless lo < hi.
    double uniform(double lo, double hi);

    /// Next integer in [0, n). Throws ValueError if n == 0.
    std::uint64_t uniform_below(std::uint64_t n);

    /// Derived generator for an independent stream: Rng(seed ^ stream).
    Rng split(std::uint64_t stream) const noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

/// Seeded in-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace retina
