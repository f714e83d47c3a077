#ifndef MINIDS_COMMON_HPP
#define MINIDS_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace minids {

// Base for every error this library throws. Each module derives the
// specific failures its contract names.
struct error : std::runtime_error {
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

struct io_failure : error {
    explicit io_failure(const std::string& what) : error(what) {}
};

// Thrown by trainers that need examples of both classes.
struct single_class : error {
    explicit single_class(const std::string& what) : error(what) {}
};

// Thrown by model/config loaders on version or structure problems.
struct model_format_error : error {
    explicit model_format_error(const std::string& what) : error(what) {}
};

// Class labels used everywhere: benign = -1, malicious = +1.
constexpr int label_benign = -1;
constexpr int label_malicious = +1;

using bytes_t = std::vector<uint8_t>;

// Deterministic RNG helpers. All randomness in the library flows through
// mt19937_64 (bit-exact across platforms) and these fixed derivations, so
// a seed pins every generated byte.
using rng_t = std::mt19937_64;

inline double uniform01(rng_t& rng) {
    // 53-bit mantissa draw in [0, 1)
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(rng_t& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Uniform integer in [0, n), n >= 1. Modulo bias is irrelevant for the
// n << 2^64 ranges used here.
inline uint64_t uniform_index(rng_t& rng, uint64_t n) {
    return rng() % n;
}

// Derives an independent sub-seed from a master seed (splitmix64 step).
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace minids

#endif
