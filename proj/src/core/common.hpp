#ifndef VDIFF_CORE_COMMON_HPP
#define VDIFF_CORE_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vd {

// error taxonomy used across the library; the C boundary maps these to status codes
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct contract_error : std::runtime_error {
    explicit contract_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

#define VD_CHECK_CONTRACT(cond, msg) \
    do { if (!(cond)) throw ::vd::contract_error(msg); } while (0)
#define VD_CHECK_CONFIG(cond, msg) \
    do { if (!(cond)) throw ::vd::config_error(msg); } while (0)

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; i++) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hash_hex(uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; i--) {
        s[i] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

// derive an independent stream seed from (seed, tag, index)
inline uint64_t mix_seed(uint64_t seed, std::string_view tag, uint64_t index = 0) {
    uint64_t h = fnv1a64(tag.data(), tag.size(), splitmix64(seed));
    return splitmix64(h ^ splitmix64(index + 0x51ed2701));
}

// Deterministic RNG. mt19937_64 has a standardized sequence and the normal
// variates use an explicit Box-Muller so streams are identical on every
// platform (std::normal_distribution is implementation-defined).
struct Rng {
    uint64_t base_seed = 0;
    std::mt19937_64 gen;
    bool have_spare = false;
    double spare = 0.0;

    explicit Rng(uint64_t seed) : base_seed(seed), gen(splitmix64(seed)) {}

    uint64_t u64() { return gen(); }

    // [0, 1)
    double uniform() { return (u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // N(0, 1) via Box-Muller
    double normal() {
        if (have_spare) {
            have_spare = false;
            return spare;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare = r * std::sin(a);
        have_spare = true;
        return r * std::cos(a);
    }

    // [0, n)
    int64_t randint(int64_t n) {
        VD_CHECK_CONTRACT(n > 0, "randint: n must be positive");
        return static_cast<int64_t>(u64() % static_cast<uint64_t>(n));
    }

    // children depend only on the parent's construction seed, not on how much
    // of the parent stream was consumed
    Rng child(std::string_view tag, uint64_t index = 0) const {
        return Rng(mix_seed(base_seed, tag, index));
    }
};

}  // namespace vd

#endif
