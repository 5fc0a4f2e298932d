#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "duelopt/behavioral.hpp"
#include "duelopt/ledger.hpp"

namespace duelopt {

struct StoppingConfig {
    double epsilon_target = 0.1;
    double delta = 0.05;
    bool cover_trigger = false;
    bool pac_trigger = false;
    bool bonferroni = false; // divide delta by K-1 for a family-wise guarantee

    void validate() const
    {
        detail::ensure(epsilon_target > 0.0, "stopping.epsilon_target must be positive");
        detail::ensure(delta > 0.0 && delta < 1.0, "stopping.delta must lie in (0, 1)");
    }
};

struct BlockingOpponent {
    PromptId arm;
    std::optional<double> lower; // empty when the pair was never dueled

    friend bool operator==(const BlockingOpponent&, const BlockingOpponent&) = default;
};

struct StoppingStatus {
    bool cover_met = false;
    bool pac_met = false;
    double epsilon_t = std::numeric_limits<double>::infinity();
    std::optional<PromptId> leader;
    std::vector<BlockingOpponent> blocking_opponents;
    bool stop = false;

    friend bool operator==(const StoppingStatus&, const StoppingStatus&) = default;
};

/// Hoeffding half-width sqrt(ln(2/delta) / (2n)). Empty for n == 0.
inline std::optional<double> pac_confidence_bound(double n, double delta)
{
    detail::ensure(delta > 0.0 && delta < 1.0, "pac_confidence_bound: delta must lie in (0, 1)");
    if (n <= 0.0) {
        return std::nullopt;
    }
    return std::sqrt(std::log(2.0 / delta) / (2.0 * n));
}

/// Dual trigger: covering radius below target and the current leader's
/// lower confidence bound above 1/2 against every opponent.
inline StoppingStatus check_stopping(const PreferenceLedger& ledger, const BehavioralConfig& behavioral,
                                     const StoppingConfig& config, double t = 1.0)
{
    StoppingStatus s;
    if (ledger.size() < 2) {
        return s;
    }
    const CoverState cover = compute_cover_state(ledger, behavioral, t);
    s.epsilon_t = cover.epsilon_t;
    s.cover_met = cover.epsilon_t < config.epsilon_target;

    const ArmIndex best = ledger.current_best();
    s.leader = ledger.arm_ids()[best];
    double delta = config.delta;
    if (config.bonferroni) {
        delta /= static_cast<double>(ledger.size() - 1);
    }
    bool pac = true;
    for (ArmIndex j = 0; j < ledger.size(); ++j) {
        if (j == best) {
            continue;
        }
        const double n = ledger.counts(best, j);
        const auto c = pac_confidence_bound(n, delta);
        if (!c) {
            pac = false;
            s.blocking_opponents.push_back({ledger.arm_ids()[j], std::nullopt});
            continue;
        }
        const double lower = ledger.mu_hat(best, j) - *c;
        if (!(lower > 0.5)) {
            pac = false;
            s.blocking_opponents.push_back({ledger.arm_ids()[j], lower});
        }
    }
    s.pac_met = pac;
    const bool any_enabled = config.cover_trigger || config.pac_trigger;
    s.stop = any_enabled && (s.cover_met || !config.cover_trigger) && (s.pac_met || !config.pac_trigger);
    return s;
}

} // namespace duelopt
