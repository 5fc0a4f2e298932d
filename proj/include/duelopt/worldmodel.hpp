#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "duelopt/errors.hpp"
#include "duelopt/prompt.hpp"
#include "duelopt/rng.hpp"

namespace duelopt {

/// Parameters of a synthetic Bradley-Terry world over a latent space.
///
/// Utility is u(x) = u_max - lambda * |x - p_opt| and preferences follow
/// mu(i, j) = logistic((u_i - u_j) / tau). Generated arms sit at latent
/// distance r from the planted optimum, r uniform in [r_lo, radius] where
/// r_lo = max(min_gap / lambda, exclusion).
struct LatentWorldSpec {
    std::size_t k = 10;
    std::size_t latent_dim = 2;
    double tau = 0.1;
    double lambda = 1.0;
    double u_max = 0.9;
    double radius = 0.8;
    double min_gap = 0.0;
    double exclusion = 0.0;
    bool include_optimum = true;
    std::uint64_t seed = 0;
};

struct WorldArm {
    PromptId id;
    std::vector<double> latent; // empty for explicit-matrix worlds
    double utility = 0.0;
};

enum class WorldKind { latent, explicit_matrix };

inline double logistic(double x)
{
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Ground truth for simulation. Immutable after construction except for arm
/// registration (mutation children).
class WorldModel {
public:
    WorldModel() = default;

    WorldKind kind() const { return kind_; }
    const LatentWorldSpec& spec() const { return spec_; }
    const std::vector<WorldArm>& arms() const { return arms_; }
    const std::vector<double>& optimum() const { return optimum_; }
    const std::optional<PromptId>& optimum_arm() const { return optimum_arm_; }
    bool has_utilities() const { return kind_ == WorldKind::latent || has_explicit_utilities_; }
    std::uint64_t label_seed() const { return label_seed_; }

    /// Bound on |mu(p,q) - mu(p',q)| per unit of latent distance.
    double lipschitz_L() const { return spec_.lambda / (4.0 * spec_.tau); }

    bool contains(const PromptId& id) const { return index_.count(id) > 0; }

    const WorldArm& arm(const PromptId& id) const
    {
        const auto it = index_.find(id);
        if (it == index_.end()) {
            throw NotFoundError("world: unknown arm " + id.value);
        }
        return arms_[it->second];
    }

    double utility_at(const std::vector<double>& latent) const
    {
        return spec_.u_max - spec_.lambda * distance(latent, optimum_);
    }

    /// Utility for latent worlds or worlds with explicit utilities; otherwise
    /// the arm's true Borda score over the full matrix.
    double quality(const PromptId& id) const { return arm(id).utility; }

    double mu(const PromptId& a, const PromptId& b) const
    {
        if (a == b) {
            return 0.5;
        }
        if (kind_ == WorldKind::explicit_matrix) {
            return matrix_[index_.at(a)][index_.at(b)];
        }
        return logistic((arm(a).utility - arm(b).utility) / spec_.tau);
    }

    double latent_distance(const PromptId& a, const PromptId& b) const
    {
        return distance(arm(a).latent, arm(b).latent);
    }

    /// Whether arm `id` answers input `input` correctly. Deterministic per
    /// (world, arm, input); the per-input accuracy is the arm's quality
    /// clamped to [0, 1].
    bool arm_correct(const PromptId& id, std::size_t input) const
    {
        const double p = std::clamp(quality(id), 0.0, 1.0);
        return hashed_uniform(label_seed_, stable_hash(id.value), input) < p;
    }

    const WorldArm& register_arm(const PromptId& id, std::vector<double> latent)
    {
        detail::ensure(kind_ == WorldKind::latent, "world: arms can only be added to latent worlds");
        detail::ensure(!contains(id), "world: duplicate arm " + id.value);
        detail::ensure(latent.size() == spec_.latent_dim, "world: latent dimension mismatch");
        WorldArm a{id, std::move(latent), 0.0};
        a.utility = utility_at(a.latent);
        index_[id] = arms_.size();
        arms_.push_back(std::move(a));
        return arms_.back();
    }

    static double distance(const std::vector<double>& a, const std::vector<double>& b)
    {
        double sum = 0.0;
        for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
            const double d = a[i] - b[i];
            sum += d * d;
        }
        return std::sqrt(sum);
    }

    static WorldModel latent(const LatentWorldSpec& spec, std::vector<WorldArm> arms, std::vector<double> optimum,
                             std::optional<PromptId> optimum_arm)
    {
        WorldModel w;
        w.kind_ = WorldKind::latent;
        w.spec_ = spec;
        w.optimum_ = std::move(optimum);
        w.optimum_arm_ = std::move(optimum_arm);
        w.label_seed_ = mix64(spec.seed ^ 0x6c6162656c73ULL);
        for (auto& a : arms) {
            w.register_arm(a.id, std::move(a.latent));
        }
        return w;
    }

    static WorldModel explicit_matrix(std::vector<PromptId> ids, std::vector<std::vector<double>> mu,
                                      std::optional<std::vector<double>> utilities, std::uint64_t seed = 0);

    friend bool operator==(const WorldModel& a, const WorldModel& b)
    {
        return a.kind_ == b.kind_ && a.matrix_ == b.matrix_ && a.optimum_ == b.optimum_ &&
               a.optimum_arm_ == b.optimum_arm_ && a.label_seed_ == b.label_seed_ &&
               a.has_explicit_utilities_ == b.has_explicit_utilities_ && a.arms_.size() == b.arms_.size() &&
               std::equal(a.arms_.begin(), a.arms_.end(), b.arms_.begin(), [](const WorldArm& x, const WorldArm& y) {
                   return x.id == y.id && x.latent == y.latent && x.utility == y.utility;
               });
    }

    const std::vector<std::vector<double>>& matrix() const { return matrix_; }

private:
    WorldKind kind_ = WorldKind::latent;
    LatentWorldSpec spec_;
    std::vector<WorldArm> arms_;
    std::unordered_map<PromptId, std::size_t> index_;
    std::vector<double> optimum_;
    std::optional<PromptId> optimum_arm_;
    std::vector<std::vector<double>> matrix_;
    bool has_explicit_utilities_ = false;
    std::uint64_t label_seed_ = 0;
};

inline WorldModel WorldModel::explicit_matrix(std::vector<PromptId> ids, std::vector<std::vector<double>> mu,
                                              std::optional<std::vector<double>> utilities, std::uint64_t seed)
{
    const std::size_t k = mu.size();
    detail::ensure(k >= 1, "world: explicit matrix is empty");
    detail::ensure(ids.size() == k, "world: arm id count does not match matrix size");
    for (std::size_t i = 0; i < k; ++i) {
        detail::ensure(mu[i].size() == k, "world: explicit matrix is not square");
        for (std::size_t j = 0; j < k; ++j) {
            const double v = mu[i][j];
            detail::ensure(v >= 0.0 && v <= 1.0, "world: mu entries must lie in [0, 1]");
            if (i == j) {
                detail::ensure(std::abs(v - 0.5) <= 1e-9, "world: mu diagonal must be 0.5");
            }
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            detail::ensure(std::abs(mu[i][j] + mu[j][i] - 1.0) <= 1e-9,
                           "world: mu(i,j) + mu(j,i) must equal 1 (row " + std::to_string(i) + ", column " +
                               std::to_string(j) + ")");
        }
    }
    if (utilities) {
        detail::ensure(utilities->size() == k, "world: utilities length does not match matrix size");
    }
    WorldModel w;
    w.kind_ = WorldKind::explicit_matrix;
    w.spec_.seed = seed;
    w.matrix_ = std::move(mu);
    w.has_explicit_utilities_ = utilities.has_value();
    w.label_seed_ = mix64(seed ^ 0x6c6162656c73ULL);
    for (std::size_t i = 0; i < k; ++i) {
        double quality = 0.0;
        if (utilities) {
            quality = (*utilities)[i];
        } else if (k > 1) {
            for (std::size_t j = 0; j < k; ++j) {
                if (j != i) {
                    quality += w.matrix_[i][j];
                }
            }
            quality /= static_cast<double>(k - 1);
        }
        w.index_[ids[i]] = i;
        w.arms_.push_back({ids[i], {}, quality});
    }
    return w;
}

inline PromptId simulated_arm_id(std::uint64_t serial) { return PromptId("p" + std::to_string(serial)); }

/// Uniform direction on the unit sphere in `dim` dimensions.
inline std::vector<double> random_direction(std::size_t dim, Rng& rng)
{
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm += x * x;
        }
    } while (norm <= 1e-24);
    norm = std::sqrt(norm);
    for (auto& x : v) {
        x /= norm;
    }
    return v;
}

/// Builds a Bradley-Terry world with arms p0..p{k-1}. The planted optimum
/// (if included) lands at a seeded random index so that index-order
/// tie-breaking cannot favour it.
inline WorldModel build_world(const LatentWorldSpec& spec)
{
    detail::ensure(spec.tau > 0.0, "world.tau must be positive");
    detail::ensure(spec.lambda > 0.0, "world.lambda must be positive");
    detail::ensure(spec.k >= 1, "world.k must be >= 1");
    detail::ensure(spec.latent_dim >= 1, "world.latent_dim must be >= 1");
    const double r_lo = std::max(spec.min_gap / spec.lambda, spec.exclusion);
    detail::ensure(spec.radius >= r_lo, "world.radius must be at least max(min_gap/lambda, exclusion)");

    Rng rng(mix64(spec.seed ^ 0x776f726c64ULL));
    std::vector<double> optimum(spec.latent_dim, 0.0);
    // spec.k means "no slot".
    const std::size_t opt_slot = spec.include_optimum ? rng.uniform_index(spec.k) : spec.k;

    std::vector<WorldArm> arms;
    std::optional<PromptId> opt_id;
    for (std::size_t i = 0; i < spec.k; ++i) {
        WorldArm a;
        a.id = simulated_arm_id(i);
        if (opt_slot == i) {
            a.latent = optimum;
            opt_id = a.id;
        } else {
            const double r = r_lo + (spec.radius - r_lo) * rng.uniform();
            a.latent = random_direction(spec.latent_dim, rng);
            for (auto& x : a.latent) {
                x *= r;
            }
        }
        arms.push_back(std::move(a));
    }
    return WorldModel::latent(spec, std::move(arms), std::move(optimum), opt_id);
}

struct TrueScores {
    std::optional<std::size_t> condorcet; // position within the queried ids
    std::vector<int> copeland;
    std::vector<double> borda;
};

/// Exact Condorcet/Copeland/Borda scores of `ids` under the true matrix.
inline TrueScores true_scores(const WorldModel& world, const std::vector<PromptId>& ids)
{
    const std::size_t k = ids.size();
    TrueScores s;
    s.copeland.assign(k, 0);
    s.borda.assign(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) {
                continue;
            }
            const double m = world.mu(ids[i], ids[j]);
            if (m > 0.5) {
                ++s.copeland[i];
            }
            s.borda[i] += m;
        }
        if (k > 1) {
            s.borda[i] /= static_cast<double>(k - 1);
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (s.copeland[i] == static_cast<int>(k) - 1) {
            s.condorcet = i;
        }
    }
    return s;
}

inline TrueScores true_scores(const WorldModel& world)
{
    std::vector<PromptId> ids;
    for (const auto& a : world.arms()) {
        ids.push_back(a.id);
    }
    return true_scores(world, ids);
}

/// parent + delta with |delta| <= eta, delta uniform in the eta-ball.
inline std::vector<double> sample_child_latent(const std::vector<double>& parent, double eta, Rng& rng)
{
    detail::ensure(eta > 0.0, "mutation eta must be positive");
    const std::size_t dim = parent.size();
    const auto dir = random_direction(dim, rng);
    const double r = eta * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
    std::vector<double> latent = parent;
    for (std::size_t i = 0; i < dim; ++i) {
        latent[i] += r * dir[i];
    }
    return latent;
}

/// Samples a child around `parent` and registers it in the world.
inline const WorldArm& mutate_latent(WorldModel& world, const PromptId& parent, const PromptId& child, double eta,
                                     Rng& rng)
{
    auto latent = sample_child_latent(world.arm(parent).latent, eta, rng);
    return world.register_arm(child, std::move(latent));
}

} // namespace duelopt
