#ifndef SPLITGATE_RNG_HPP
#define SPLITGATE_RNG_HPP

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace splitgate {

/// SplitMix64 step: advances `state` and returns the next output.
/// Reference vector: state 1234567 yields 6457827717110365317,
/// 3203168211198807973, 9817491932198370423, ...
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256** 1.0 (Blackman & Vigna). The only generator used for
/// splits, folds, null sampling and synthetic data, so every plan can be
/// reproduced bit-for-bit from its seed in any language.
///
/// Seeding from a single 64-bit value fills the four state words with
/// consecutive splitmix64 outputs.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept
    {
        std::uint64_t sm = seed;
        for (auto& word : state_)
            word = splitmix64(sm);
    }

    static Xoshiro256 from_state(const std::array<std::uint64_t, 4>& state) noexcept
    {
        Xoshiro256 g(0);
        g.state_ = state;
        return g;
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next(); }

    std::uint64_t next() noexcept
    {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform integer in [0, bound) by rejection of the biased low zone:
    /// draws below (2^64 - bound) mod bound are discarded, the rest reduced
    /// modulo bound. bound must be > 0.
    std::uint64_t bounded(std::uint64_t bound) noexcept
    {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold)
                return r % bound;
        }
    }

    /// Uniform double in [0, 1) from the top 53 bits.
    double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
};

/// Independent stream seed for a sub-task, e.g. (seed, repeat) or
/// (seed, iteration). Scheduling-independent by construction.
inline std::uint64_t derive_seed(std::uint64_t seed) noexcept
{
    std::uint64_t s = seed;
    return splitmix64(s);
}

template <class... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, Rest... rest) noexcept
{
    std::uint64_t s = derive_seed(seed) ^ index;
    return derive_seed(splitmix64(s), static_cast<std::uint64_t>(rest)...);
}

/// Fisher-Yates shuffle, last position first: swap i with bounded(i + 1).
template <class T>
void shuffle(std::span<T> items, Xoshiro256& rng) noexcept
{
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.bounded(i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

} // namespace splitgate

#endif // SPLITGATE_RNG_HPP
