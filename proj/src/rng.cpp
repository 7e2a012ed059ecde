#include "edts/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace edts {

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) noexcept
{
    return splitmix64(splitmix64(root) ^ (stream * 0xd1b54a32d192ed03ULL + 0x2545f4914f6cdd1dULL));
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) noexcept
{
    return derive_seed(derive_seed(root, a), b);
}

std::uint64_t Rng::uniform_index(std::uint64_t n)
{
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    // rejection sampling over the largest multiple of n
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t v;
    do {
        v = next();
    } while (v >= limit);
    return v % n;
}

double Rng::uniform01()
{
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::normal()
{
    // Box-Muller; u1 drawn from (0, 1] so the log is finite
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::exponential(double mean)
{
    return -mean * std::log(1.0 - uniform01());
}

std::string Rng::state() const
{
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::restore(const std::string& state)
{
    std::istringstream is(state);
    is >> engine_;
    if (!is) throw std::invalid_argument("invalid RNG state");
}

} // namespace edts
