#pragma once

#include <cstdint>
#include <vector>

namespace swe {

/// splitmix64 finalizer. Used to whiten seeds and to build derived streams.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Order-sensitive combiner for deriving stream seeds:
///   combine64(h, v) = mix64(h ^ (v + 0x9e3779b97f4a7c15 + (h << 6) + (h >> 2)))
inline std::uint64_t combine64(std::uint64_t h, std::uint64_t v) {
    return mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

/// Seed of the PRNG streams owned by ensemble member `member` in trial `trial`.
inline std::uint64_t derive_seed(std::uint64_t master_seed,
                                 std::uint64_t trial_index,
                                 std::uint64_t member_index) {
    return combine64(combine64(master_seed, trial_index), member_index);
}

/// xorshift64* generator. State update per draw:
///   s ^= s >> 12;  s ^= s << 25;  s ^= s >> 27;  output = s * 0x2545f4914f6cdd1d
/// A zero seed is remapped through mix64 (the all-zero state is not allowed).
/// Every consumer of randomness in this library goes through this engine so
/// that splits, shuffles and weight draws are identical across platforms.
class Xorshift64Star {
public:
    explicit Xorshift64Star(std::uint64_t seed)
        : state_(seed != 0 ? seed : mix64(0)) {}

    std::uint64_t next_u64() {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545f4914f6cdd1dULL;
    }

    /// Uniform in [0,1): top 53 bits of next_u64, scaled by 2^-53.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo,hi).
    double next_double(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Uniform integer in [0,n) by modulo reduction; n must be positive.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_;
};

/// Fisher-Yates shuffle: for i = n-1 down to 1, swap v[i] with v[rng % (i+1)].
template <typename T>
void shuffle(std::vector<T>& v, Xorshift64Star& rng) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i >= 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
        if (i != j) std::swap(v[i], v[j]);
    }
}

/// Seeded permutation of {0..n-1}.
inline std::vector<std::uint32_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::uint32_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
    Xorshift64Star rng(seed);
    shuffle(idx, rng);
    return idx;
}

} // namespace swe
