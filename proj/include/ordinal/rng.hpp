#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ordinal {

// splitmix64 finaliser; used to mix seeds and tags into child stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a, so stream tags can be readable strings with a stable cross-platform hash.
inline std::uint64_t hash_tag(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Derives an independent child seed from a base seed plus a sequence of tags
// (strings and/or integers).  Every randomised stage of the pipeline gets its
// own named stream so results do not depend on evaluation order.
class SeedSequence {
public:
    explicit SeedSequence(std::uint64_t base) : state_(mix64(base)) {}

    SeedSequence& with(std::string_view tag) {
        state_ = mix64(state_ ^ hash_tag(tag));
        return *this;
    }
    SeedSequence& with(std::uint64_t v) {
        state_ = mix64(state_ ^ v);
        return *this;
    }
    std::uint64_t seed() const { return state_; }

private:
    std::uint64_t state_;
};

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    return SeedSequence(base).with(tag).seed();
}
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t a) {
    return SeedSequence(base).with(tag).with(a).seed();
}
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t a,
                                 std::uint64_t b) {
    return SeedSequence(base).with(tag).with(a).with(b).seed();
}

// Deterministic RNG.  mt19937_64 is bit-exact across platforms; the
// distributions are implemented here because the std:: ones are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return (gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (cached second deviate)
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling to avoid modulo bias
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
        std::uint64_t v = gen_();
        while (v >= limit) v = gen_();
        return v % n;
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

    // Fisher-Yates shuffle
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ordinal
