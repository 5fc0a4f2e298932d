#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include <boost/random/beta_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "duelopt/errors.hpp"

namespace duelopt {

/// Seedable generator used by every stochastic component.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Distributions come from Boost.Random rather than <random>: the
/// standard distribution algorithms are implementation defined, while the
/// Boost ones are fixed code. A fresh distribution object is used for every
/// draw, so no state lives outside the engine and snapshots only need the
/// engine position.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double uniform() { return boost::random::uniform_01<double>{}(engine_); }

    /// Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n)
    {
        detail::ensure(n > 0, "uniform_index: empty range");
        return boost::random::uniform_int_distribution<std::size_t>{0, n - 1}(engine_);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() { return boost::random::normal_distribution<double>{}(engine_); }

    /// Gamma(shape, 1).
    double gamma(double shape)
    {
        detail::ensure(shape > 0.0 && std::isfinite(shape), "gamma: shape must be positive");
        return boost::random::gamma_distribution<double>{shape}(engine_);
    }

    double beta(double a, double b)
    {
        detail::ensure(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b), "beta: shapes must be positive");
        return boost::random::beta_distribution<double>{a, b}(engine_);
    }

    std::string state() const
    {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void set_state(const std::string& s)
    {
        std::istringstream is(s);
        std::mt19937_64 e;
        is >> e;
        if (is.fail()) {
            throw SnapshotError("rng: corrupt state string");
        }
        engine_ = e;
    }

    friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive stable per-(seed, key) values without
/// advancing any generator.
inline std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a, stable across platforms (std::hash is not).
inline std::uint64_t stable_hash(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline double hashed_uniform(std::uint64_t a, std::uint64_t b, std::uint64_t c)
{
    const std::uint64_t h = mix64(mix64(mix64(a) ^ b) ^ c);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

} // namespace duelopt
