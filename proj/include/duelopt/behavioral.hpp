#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include "duelopt/ledger.hpp"

namespace duelopt {

/// An arm's empirical win rates against every pool member.
struct BehavioralVector {
    PromptId arm;
    std::optional<ArmIndex> self_index; // coordinate of the arm itself, if any
    std::vector<double> winrates;       // 0.5 where never dueled
    std::vector<double> support;        // duel mass per coordinate
};

struct BehavioralConfig {
    double n_min = 10.0;          // duel mass needed to join the cover set
    double prune_threshold = 0.0; // 0 disables redundancy pruning
    double rho0 = 1.0;
    double alpha_exp = 0.5;
};

struct CoverState {
    double epsilon_t = 0.0;
    double rho_t = 0.0;
    double rho0 = 1.0;
    double alpha_exp = 0.5;
    double n_min = 10.0;
    std::vector<ArmIndex> cover;
};

inline BehavioralVector behavioral_vector(const PreferenceLedger& ledger, ArmIndex i)
{
    detail::ensure<std::out_of_range>(i < ledger.size(), "behavioral_vector: arm index out of range");
    BehavioralVector v;
    v.arm = ledger.arm_ids()[i];
    v.self_index = i;
    v.winrates.resize(ledger.size());
    v.support.resize(ledger.size());
    for (ArmIndex j = 0; j < ledger.size(); ++j) {
        v.winrates[j] = i == j ? 0.5 : ledger.mu_hat(i, j);
        v.support[j] = i == j ? 0.0 : ledger.counts(i, j);
    }
    return v;
}

inline std::vector<BehavioralVector> behavioral_vectors(const PreferenceLedger& ledger)
{
    std::vector<BehavioralVector> out;
    out.reserve(ledger.size());
    for (ArmIndex i = 0; i < ledger.size(); ++i) {
        out.push_back(behavioral_vector(ledger, i));
    }
    return out;
}

namespace detail {

inline bool excluded(const BehavioralVector& a, const BehavioralVector& b, std::size_t c)
{
    return (a.self_index && *a.self_index == c) || (b.self_index && *b.self_index == c);
}

} // namespace detail

/// L2 distance between win-rate vectors. The coordinates belonging to either
/// arm itself are dropped from both vectors.
inline double behavioral_distance(const BehavioralVector& a, const BehavioralVector& b)
{
    detail::ensure(a.winrates.size() == b.winrates.size(), "behavioral_distance: length mismatch");
    double sum = 0.0;
    for (std::size_t c = 0; c < a.winrates.size(); ++c) {
        if (detail::excluded(a, b, c)) {
            continue;
        }
        const double d = a.winrates[c] - b.winrates[c];
        sum += d * d;
    }
    return std::sqrt(sum);
}

/// True when more than half of the compared coordinates have no evidence on
/// either side, so the distance mostly reflects the 0.5 default.
inline bool distance_is_low_confidence(const BehavioralVector& a, const BehavioralVector& b)
{
    std::size_t used = 0;
    std::size_t empty = 0;
    for (std::size_t c = 0; c < a.winrates.size(); ++c) {
        if (detail::excluded(a, b, c)) {
            continue;
        }
        ++used;
        const bool a_empty = c >= a.support.size() || a.support[c] <= 0.0;
        const bool b_empty = c >= b.support.size() || b.support[c] <= 0.0;
        if (a_empty || b_empty) {
            ++empty;
        }
    }
    return used > 0 && 2 * empty > used;
}

/// max over pool of min over cover of behavioral_distance.
inline double covering_radius(const std::vector<BehavioralVector>& pool, const std::vector<BehavioralVector>& cover)
{
    detail::ensure(!cover.empty(), "covering_radius: cover set is empty");
    double radius = 0.0;
    for (const auto& p : pool) {
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& q : cover) {
            nearest = std::min(nearest, behavioral_distance(p, q));
        }
        radius = std::max(radius, nearest);
    }
    return radius;
}

/// rho_t = rho0 * t^(-alpha_exp)
inline double zoom_radius(double rho0, double alpha_exp, double t)
{
    detail::ensure(t >= 1.0, "zoom_radius: t must be >= 1");
    detail::ensure(rho0 > 0.0, "zoom_radius: rho0 must be positive");
    detail::ensure(alpha_exp > 0.0, "zoom_radius: alpha_exp must be positive");
    return rho0 * std::pow(t, -alpha_exp);
}

/// Arms whose total duel mass reaches n_min.
inline std::vector<ArmIndex> cover_set(const PreferenceLedger& ledger, double n_min)
{
    std::vector<ArmIndex> cover;
    for (ArmIndex i = 0; i < ledger.size(); ++i) {
        if (ledger.arm_mass(i) >= n_min) {
            cover.push_back(i);
        }
    }
    return cover;
}

/// Covering radius of the pool against its well-measured arms. With no arm
/// measured yet the radius is infinite.
inline CoverState compute_cover_state(const PreferenceLedger& ledger, const BehavioralConfig& config, double t)
{
    CoverState s;
    s.rho0 = config.rho0;
    s.alpha_exp = config.alpha_exp;
    s.n_min = config.n_min;
    s.rho_t = zoom_radius(config.rho0, config.alpha_exp, std::max(1.0, t));
    s.cover = cover_set(ledger, config.n_min);
    if (s.cover.empty()) {
        s.epsilon_t = std::numeric_limits<double>::infinity();
        return s;
    }
    const auto pool = behavioral_vectors(ledger);
    std::vector<BehavioralVector> cover;
    cover.reserve(s.cover.size());
    for (ArmIndex i : s.cover) {
        cover.push_back(pool[i]);
    }
    s.epsilon_t = covering_radius(pool, cover);
    return s;
}

/// Greedy redundancy scan in ranking order: an arm closer than `threshold` to
/// an already kept arm is marked for removal. Protected arms and the current
/// best are always kept.
inline std::set<ArmIndex> redundancy_prune(const PreferenceLedger& ledger, double threshold,
                                           const std::set<ArmIndex>& protect)
{
    detail::ensure(threshold >= 0.0, "redundancy_prune: threshold must be >= 0");
    std::set<ArmIndex> removed;
    if (ledger.size() < 2 || threshold == 0.0) {
        return removed;
    }
    const auto order = ledger.ranking();
    const ArmIndex best = order.front();
    const auto vectors = behavioral_vectors(ledger);
    std::vector<ArmIndex> kept;
    for (ArmIndex i : order) {
        const bool is_protected = i == best || protect.count(i) > 0;
        bool redundant = false;
        for (ArmIndex k : kept) {
            if (behavioral_distance(vectors[i], vectors[k]) < threshold) {
                redundant = true;
                break;
            }
        }
        if (redundant && !is_protected) {
            removed.insert(i);
        } else {
            kept.push_back(i);
        }
    }
    return removed;
}

} // namespace duelopt
