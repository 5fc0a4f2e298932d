#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "duelopt/errors.hpp"
#include "duelopt/prompt.hpp"

namespace duelopt {

/// Dense row-major square matrix of doubles.
class SquareMatrix {
public:
    SquareMatrix() = default;
    explicit SquareMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }

    /// Grows by one zero row and column, keeping existing entries in place.
    void grow()
    {
        SquareMatrix next(n_ + 1);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                next(i, j) = (*this)(i, j);
            }
        }
        *this = std::move(next);
    }

    /// Keeps only the listed indices, in the order given.
    SquareMatrix select(const std::vector<std::size_t>& keep) const
    {
        SquareMatrix next(keep.size());
        for (std::size_t a = 0; a < keep.size(); ++a) {
            for (std::size_t b = 0; b < keep.size(); ++b) {
                next(a, b) = (*this)(keep[a], keep[b]);
            }
        }
        return next;
    }

    std::vector<std::vector<double>> rows() const
    {
        std::vector<std::vector<double>> out(n_, std::vector<double>(n_));
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                out[i][j] = (*this)(i, j);
            }
        }
        return out;
    }

    friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

/// Empirical statistics for one ordered pair (i, j).
struct PairStats {
    double mu_hat = 0.5;
    double gap = 0.5;
    double upper = 0.5;
    double lower = 0.5;
    double n = 0.0;
};

/// Pairwise win mass W and duel mass N over the active arms.
///
/// Both matrices are real valued: margin-discounted and tie updates add
/// fractional win mass. Every update adds exactly one unit of duel mass, so
/// W(i,j) + W(j,i) == N(i,j) is maintained up to rounding.
class PreferenceLedger {
public:
    PreferenceLedger() = default;

    explicit PreferenceLedger(std::vector<PromptId> ids)
        : wins_(ids.size()), counts_(ids.size()), arm_ids_(std::move(ids))
    {
        std::set<PromptId> seen(arm_ids_.begin(), arm_ids_.end());
        detail::ensure(seen.size() == arm_ids_.size(), "PreferenceLedger: duplicate arm id");
    }

    /// Rebuilds a ledger from stored matrices (snapshots, tests).
    PreferenceLedger(std::vector<PromptId> ids, SquareMatrix wins, SquareMatrix counts)
        : wins_(std::move(wins)), counts_(std::move(counts)), arm_ids_(std::move(ids))
    {
        detail::ensure(wins_.size() == arm_ids_.size() && counts_.size() == arm_ids_.size(),
                       "PreferenceLedger: matrix shape does not match arm count");
    }

    std::size_t size() const { return arm_ids_.size(); }
    const std::vector<PromptId>& arm_ids() const { return arm_ids_; }
    const SquareMatrix& wins() const { return wins_; }
    const SquareMatrix& counts() const { return counts_; }
    double wins(ArmIndex i, ArmIndex j) const { return wins_(i, j); }
    double counts(ArmIndex i, ArmIndex j) const { return counts_(i, j); }

    std::optional<ArmIndex> index_of(const PromptId& id) const
    {
        const auto it = std::find(arm_ids_.begin(), arm_ids_.end(), id);
        if (it == arm_ids_.end()) {
            return std::nullopt;
        }
        return static_cast<ArmIndex>(it - arm_ids_.begin());
    }

    /// Winner gets 0.5 + gamma of the unit mass, loser 0.5 - gamma.
    /// gamma = 0.5 is the plain unit-win update; gamma = 0 is a pure tie.
    void record_duel(ArmIndex winner, ArmIndex loser, double gamma)
    {
        check_pair(winner, loser, "record_duel");
        detail::ensure(gamma >= 0.0 && gamma <= 0.5, "record_duel: gamma must lie in [0, 0.5]");
        wins_(winner, loser) += 0.5 + gamma;
        wins_(loser, winner) += 0.5 - gamma;
        counts_(winner, loser) += 1.0;
        counts_(loser, winner) += 1.0;
    }

    void record_tie(ArmIndex i, ArmIndex j)
    {
        check_pair(i, j, "record_tie");
        wins_(i, j) += 0.5;
        wins_(j, i) += 0.5;
        counts_(i, j) += 1.0;
        counts_(j, i) += 1.0;
    }

    /// Empirical win rate; exactly 0.5 for a pair that has never dueled.
    double mu_hat(ArmIndex i, ArmIndex j) const
    {
        const double n = counts_(i, j);
        return n > 0.0 ? wins_(i, j) / n : 0.5;
    }

    PairStats pair_stats(ArmIndex i, ArmIndex j, double t, double alpha) const
    {
        check_pair(i, j, "pair_stats");
        detail::ensure(t >= 1.0, "pair_stats: round index must be >= 1");
        detail::ensure(alpha > 0.0, "pair_stats: alpha must be positive");
        PairStats s;
        s.n = counts_(i, j);
        s.mu_hat = mu_hat(i, j);
        // Unseen pairs are treated as maximally uncertain.
        s.gap = s.n > 0.0 ? std::abs(s.mu_hat - 0.5) : 0.5;
        const double bonus = std::sqrt(alpha * std::log(t) / std::max(1.0, s.n));
        s.upper = s.mu_hat + bonus;
        s.lower = s.mu_hat - bonus;
        return s;
    }

    /// Number of opponents each arm beats empirically (strict > 0.5).
    std::vector<int> copeland_scores() const
    {
        const std::size_t k = size();
        std::vector<int> c(k, 0);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                if (i != j && mu_hat(i, j) > 0.5) {
                    ++c[i];
                }
            }
        }
        return c;
    }

    /// Average empirical win rate against the other K-1 arms.
    std::vector<double> borda_scores() const
    {
        const std::size_t k = size();
        detail::ensure(k >= 2, "borda_scores: need at least two arms");
        std::vector<double> f(k, 0.0);
        for (std::size_t i = 0; i < k; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                if (i != j) {
                    sum += mu_hat(i, j);
                }
            }
            f[i] = sum / static_cast<double>(k - 1);
        }
        return f;
    }

    /// Arms ordered best first: Copeland, then Borda, then lower index.
    std::vector<ArmIndex> ranking() const
    {
        const std::size_t k = size();
        std::vector<ArmIndex> order(k);
        for (std::size_t i = 0; i < k; ++i) {
            order[i] = i;
        }
        if (k < 2) {
            return order;
        }
        const auto copeland = copeland_scores();
        const auto borda = borda_scores();
        // Borda values that differ only by rounding count as tied.
        std::vector<long long> borda_key(k);
        for (std::size_t i = 0; i < k; ++i) {
            borda_key[i] = std::llround(borda[i] / kBordaTieTolerance);
        }
        std::sort(order.begin(), order.end(), [&](ArmIndex a, ArmIndex b) {
            if (copeland[a] != copeland[b]) {
                return copeland[a] > copeland[b];
            }
            if (borda_key[a] != borda_key[b]) {
                return borda_key[a] > borda_key[b];
            }
            return a < b;
        });
        return order;
    }

    ArmIndex current_best() const
    {
        detail::ensure(size() >= 1, "current_best: empty ledger");
        return ranking().front();
    }

    ArmIndex expand(const PromptId& new_arm)
    {
        detail::ensure(!index_of(new_arm).has_value(), "expand: duplicate arm id " + new_arm.value);
        wins_.grow();
        counts_.grow();
        arm_ids_.push_back(new_arm);
        return size() - 1;
    }

    /// Deletes the given arms; survivors keep their relative order and stats.
    void remove(const std::set<ArmIndex>& arms)
    {
        for (ArmIndex a : arms) {
            detail::ensure<std::out_of_range>(a < size(), "remove: arm index out of range");
        }
        detail::ensure(arms.size() < size(), "remove: at least one arm must survive");
        std::vector<std::size_t> keep;
        std::vector<PromptId> ids;
        for (std::size_t i = 0; i < size(); ++i) {
            if (!arms.count(i)) {
                keep.push_back(i);
                ids.push_back(arm_ids_[i]);
            }
        }
        wins_ = wins_.select(keep);
        counts_ = counts_.select(keep);
        arm_ids_ = std::move(ids);
    }

    /// Total duel mass, each comparison counted once.
    double total_mass() const
    {
        double sum = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            for (std::size_t j = i + 1; j < size(); ++j) {
                sum += counts_(i, j);
            }
        }
        return sum;
    }

    /// Duel mass involving arm i.
    double arm_mass(ArmIndex i) const
    {
        double sum = 0.0;
        for (std::size_t j = 0; j < size(); ++j) {
            sum += counts_(i, j);
        }
        return sum;
    }

    friend bool operator==(const PreferenceLedger&, const PreferenceLedger&) = default;

    static constexpr double kBordaTieTolerance = 1e-12;

private:
    void check_pair(ArmIndex i, ArmIndex j, const char* op) const
    {
        detail::ensure<std::out_of_range>(i < size() && j < size(),
                                          std::string(op) + ": arm index out of range");
        detail::ensure(i != j, std::string(op) + ": an arm cannot duel itself");
    }

    SquareMatrix wins_;
    SquareMatrix counts_;
    std::vector<PromptId> arm_ids_;
};

} // namespace duelopt
