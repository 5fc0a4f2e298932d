#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "duelopt/errors.hpp"

namespace duelopt {

enum class BatchMode { adaptive, fixed };

/// How many inputs each duel is judged on.
struct BatchPolicy {
    BatchMode mode = BatchMode::fixed;
    double c_prime = 1.0;
    std::size_t m_max = 50;
    std::size_t m_min = 1;
    std::size_t fixed_m = 1;

    void validate() const
    {
        detail::ensure(c_prime > 0.0, "batch.c_prime must be positive");
        detail::ensure(m_min >= 1, "batch.m_min must be >= 1");
        detail::ensure(m_min <= m_max, "batch.m_min must not exceed batch.m_max");
        detail::ensure(fixed_m >= 1, "batch.m must be >= 1");
    }
};

/// m_t = clamp(ceil(c' ln t / gap^2), m_min, m_max) in adaptive mode.
/// Callers substitute gap = 0.5 for pairs that have never dueled.
inline std::size_t batch_size(const BatchPolicy& policy, double t, double gap)
{
    detail::ensure(t >= 1.0, "batch_size: t must be >= 1");
    detail::ensure(gap > 0.0 && gap <= 0.5, "batch_size: gap must lie in (0, 0.5]");
    if (policy.mode == BatchMode::fixed) {
        return policy.fixed_m;
    }
    const double raw = std::ceil(policy.c_prime * std::log(t) / (gap * gap));
    const double clamped =
        std::clamp(raw, static_cast<double>(policy.m_min), static_cast<double>(policy.m_max));
    return static_cast<std::size_t>(clamped);
}

/// Smallest m with 2 exp(-2 m gap^2) <= delta (Hoeffding, two-sided).
inline std::size_t required_samples(double gap, double delta)
{
    detail::ensure(gap > 0.0 && gap <= 0.5, "required_samples: gap must lie in (0, 0.5]");
    detail::ensure(delta > 0.0 && delta < 1.0, "required_samples: delta must lie in (0, 1)");
    return static_cast<std::size_t>(std::ceil(std::log(2.0 / delta) / (2.0 * gap * gap)));
}

} // namespace duelopt
