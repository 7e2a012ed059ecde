#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace edts {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Derive an independent stream seed from a root seed and a stream label.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) noexcept;
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) noexcept;

// Distributions are written out by hand because the std:: ones are not
// specified bit-for-bit across standard libraries, and every run must be
// reproducible from its seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    bool coin() { return (next() >> 63) != 0; }

    double normal();
    double exponential(double mean);

    std::string state() const;
    void restore(const std::string& state);

private:
    std::mt19937_64 engine_;
};

} // namespace edts
