#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "duelopt/ledger.hpp"
#include "duelopt/rng.hpp"

namespace duelopt {

enum class SamplerKind { dts_copeland, dts_borda, rucb, random };

struct SamplerConfig {
    SamplerKind kind = SamplerKind::dts_copeland;
    double alpha = 1.2;
    std::uint64_t seed = 0;
};

enum class ChoiceRationale { copeland_leader_vs_uncertain, top2_skill, ucb_leader_vs_challenger, uniform };

struct DuelChoice {
    ArmIndex first = 0;
    ArmIndex second = 1;
    ChoiceRationale rationale = ChoiceRationale::uniform;

    friend bool operator==(const DuelChoice&, const DuelChoice&) = default;
};

inline std::string_view to_string(SamplerKind k)
{
    switch (k) {
    case SamplerKind::dts_copeland: return "dts_copeland";
    case SamplerKind::dts_borda: return "dts_borda";
    case SamplerKind::rucb: return "rucb";
    case SamplerKind::random: return "random";
    }
    return "?";
}

inline SamplerKind sampler_kind_from_string(std::string_view s)
{
    if (s == "dts_copeland") return SamplerKind::dts_copeland;
    if (s == "dts_borda") return SamplerKind::dts_borda;
    if (s == "rucb") return SamplerKind::rucb;
    if (s == "random") return SamplerKind::random;
    throw std::invalid_argument("unknown sampler kind '" + std::string(s) + "'");
}

namespace detail {

/// Index of the maximum over `candidates`; exact ties broken uniformly.
/// The RNG is only advanced when there is more than one maximiser.
template <class Value>
ArmIndex argmax_uniform(const std::vector<ArmIndex>& candidates, const std::vector<Value>& value, Rng& rng)
{
    ensure(!candidates.empty(), "argmax over empty candidate set");
    Value best = value[candidates.front()];
    for (ArmIndex c : candidates) {
        if (value[c] > best) {
            best = value[c];
        }
    }
    std::vector<ArmIndex> tied;
    for (ArmIndex c : candidates) {
        if (value[c] == best) {
            tied.push_back(c);
        }
    }
    return tied.size() == 1 ? tied.front() : tied[rng.uniform_index(tied.size())];
}

inline void require_pairable(const PreferenceLedger& ledger, const char* op)
{
    ensure(ledger.size() >= 2, std::string(op) + ": need at least two arms");
}

} // namespace detail

/// Two-phase Double Thompson Sampling targeting the Copeland winner.
///
/// Phase 1 keeps the arms with the largest optimistic Copeland count
/// (u_ij >= 0.5) and picks among them by a Thompson-sampled Copeland count.
/// Phase 2 picks the opponent with the largest sampled win probability
/// against the first arm, restricted to opponents whose lower bound is still
/// <= 0.5; when every opponent is confidently beaten all of them compete.
inline DuelChoice dts_copeland_select(const PreferenceLedger& ledger, double t, const SamplerConfig& config, Rng& rng)
{
    detail::require_pairable(ledger, "dts_copeland_select");
    detail::ensure(t >= 1.0, "dts_copeland_select: t must be >= 1");
    const std::size_t k = ledger.size();

    std::vector<int> optimistic(k, 0);
    for (ArmIndex i = 0; i < k; ++i) {
        for (ArmIndex j = 0; j < k; ++j) {
            if (i != j && ledger.pair_stats(i, j, t, config.alpha).upper >= 0.5) {
                ++optimistic[i];
            }
        }
    }
    const int top = *std::max_element(optimistic.begin(), optimistic.end());
    std::vector<ArmIndex> leaders;
    for (ArmIndex i = 0; i < k; ++i) {
        if (optimistic[i] == top) {
            leaders.push_back(i);
        }
    }

    std::vector<int> sampled(k, -1);
    for (ArmIndex i : leaders) {
        int s = 0;
        for (ArmIndex j = 0; j < k; ++j) {
            if (j == i) {
                continue;
            }
            const double theta = rng.beta(ledger.wins(i, j) + 1.0, ledger.wins(j, i) + 1.0);
            if (theta >= 0.5) {
                ++s;
            }
        }
        sampled[i] = s;
    }
    const ArmIndex first = detail::argmax_uniform(leaders, sampled, rng);

    std::vector<ArmIndex> uncertain;
    std::vector<ArmIndex> others;
    for (ArmIndex j = 0; j < k; ++j) {
        if (j == first) {
            continue;
        }
        others.push_back(j);
        if (ledger.pair_stats(first, j, t, config.alpha).lower <= 0.5) {
            uncertain.push_back(j);
        }
    }
    const auto& pool = uncertain.empty() ? others : uncertain;
    std::vector<double> theta(k, -1.0);
    for (ArmIndex j : pool) {
        theta[j] = rng.beta(ledger.wins(j, first) + 1.0, ledger.wins(first, j) + 1.0);
    }
    const ArmIndex second = detail::argmax_uniform(pool, theta, rng);
    return {first, second, ChoiceRationale::copeland_leader_vs_uncertain};
}

/// Single-posterior DTS variant aimed at the Borda winner: one Beta skill
/// draw per arm from its aggregate wins and losses, top two duel.
inline DuelChoice dts_borda_select(const PreferenceLedger& ledger, const SamplerConfig&, Rng& rng)
{
    detail::require_pairable(ledger, "dts_borda_select");
    const std::size_t k = ledger.size();
    std::vector<double> skill(k);
    for (ArmIndex i = 0; i < k; ++i) {
        double won = 0.0;
        double lost = 0.0;
        for (ArmIndex j = 0; j < k; ++j) {
            if (j != i) {
                won += ledger.wins(i, j);
                lost += ledger.wins(j, i);
            }
        }
        skill[i] = rng.beta(won + 1.0, lost + 1.0);
    }
    std::vector<ArmIndex> all(k);
    for (ArmIndex i = 0; i < k; ++i) {
        all[i] = i;
    }
    const ArmIndex first = detail::argmax_uniform(all, skill, rng);
    all.erase(all.begin() + static_cast<std::ptrdiff_t>(first));
    const ArmIndex second = detail::argmax_uniform(all, skill, rng);
    return {first, second, ChoiceRationale::top2_skill};
}

/// Relative Upper Confidence Bound: first arm drawn uniformly from the arms
/// that are optimistically unbeaten, second arm is its strongest optimistic
/// challenger.
inline DuelChoice rucb_select(const PreferenceLedger& ledger, double t, const SamplerConfig& config, Rng& rng)
{
    detail::require_pairable(ledger, "rucb_select");
    detail::ensure(t >= 1.0, "rucb_select: t must be >= 1");
    const std::size_t k = ledger.size();
    std::vector<ArmIndex> candidates;
    for (ArmIndex i = 0; i < k; ++i) {
        bool unbeaten = true;
        for (ArmIndex j = 0; j < k && unbeaten; ++j) {
            if (j != i && ledger.pair_stats(i, j, t, config.alpha).upper < 0.5) {
                unbeaten = false;
            }
        }
        if (unbeaten) {
            candidates.push_back(i);
        }
    }
    ArmIndex first = 0;
    if (candidates.empty()) {
        first = rng.uniform_index(k);
    } else {
        first = candidates[rng.uniform_index(candidates.size())];
    }
    std::vector<ArmIndex> challengers;
    std::vector<double> upper(k, 0.0);
    for (ArmIndex j = 0; j < k; ++j) {
        if (j != first) {
            challengers.push_back(j);
            upper[j] = ledger.pair_stats(j, first, t, config.alpha).upper;
        }
    }
    const ArmIndex second = detail::argmax_uniform(challengers, upper, rng);
    return {first, second, ChoiceRationale::ucb_leader_vs_challenger};
}

/// Uniform over the K(K-1)/2 unordered pairs; returned with first < second.
inline DuelChoice random_select(const PreferenceLedger& ledger, Rng& rng)
{
    detail::require_pairable(ledger, "random_select");
    const std::size_t k = ledger.size();
    std::size_t r = rng.uniform_index(k * (k - 1) / 2);
    for (ArmIndex i = 0; i < k; ++i) {
        const std::size_t row = k - 1 - i;
        if (r < row) {
            return {i, i + 1 + r, ChoiceRationale::uniform};
        }
        r -= row;
    }
    return {0, 1, ChoiceRationale::uniform}; // unreachable
}

inline DuelChoice select_pair(const PreferenceLedger& ledger, double t, const SamplerConfig& config, Rng& rng)
{
    switch (config.kind) {
    case SamplerKind::dts_copeland: return dts_copeland_select(ledger, t, config, rng);
    case SamplerKind::dts_borda: return dts_borda_select(ledger, config, rng);
    case SamplerKind::rucb: return rucb_select(ledger, t, config, rng);
    case SamplerKind::random: return random_select(ledger, rng);
    }
    throw std::logic_error("select_pair: unhandled sampler kind");
}

} // namespace duelopt
