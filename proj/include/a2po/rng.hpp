#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace a2po {

// Deterministic xoshiro256++ generator. All randomness in the library goes
// through this type so that runs are reproducible bit-for-bit across
// platforms; std::* distributions are implementation-defined and never used.
class Rng {
public:
    Rng() : Rng(0) {}

    explicit Rng(std::uint64_t seed) {
        // splitmix64 expansion of the seed into the full state.
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    // Derives an independent child stream from a textual label and index.
    // Fresh draws on the child never affect the parent's sequence.
    Rng split(std::string_view label, std::uint64_t index = 0) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (char ch : label) {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ULL;
        }
        std::uint64_t x = state_[0] ^ (h + 0x9e3779b97f4a7c15ULL * (index + 1));
        Rng child;
        for (auto& word : child.state_) word = splitmix64(x);
        return child;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // One standard normal draw via Box-Muller. The second value of the pair
    // is discarded so the generator state stays a pure function of the draw
    // count (no hidden cache to serialize).
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    std::uint64_t uniform_index(std::uint64_t n) {
        // Lemire-style rejection-free enough for our n << 2^64; plain modulo
        // bias is < 2^-40 for n <= 2^24 but we reject to keep draws exact.
        const std::uint64_t threshold = -n % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    std::array<std::uint64_t, 4> state() const { return state_; }
    void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace a2po
