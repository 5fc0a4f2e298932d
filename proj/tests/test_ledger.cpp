#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "duelopt/ledger.hpp"

namespace {

using duelopt::PreferenceLedger;
using duelopt::PromptId;

PreferenceLedger make(std::size_t k)
{
    std::vector<PromptId> ids;
    for (std::size_t i = 0; i < k; ++i) {
        ids.push_back(PromptId("a" + std::to_string(i)));
    }
    return PreferenceLedger(ids);
}

// Ledger with the given empirical win rates, each pair seen 10 times.
PreferenceLedger from_rates(const std::vector<std::vector<double>>& mu)
{
    const std::size_t k = mu.size();
    duelopt::SquareMatrix w(k), n(k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j) {
                w(i, j) = 10.0 * mu[i][j];
                n(i, j) = 10.0;
            }
        }
    }
    std::vector<PromptId> ids;
    for (std::size_t i = 0; i < k; ++i) ids.push_back(PromptId("a" + std::to_string(i)));
    return PreferenceLedger(ids, w, n);
}

TEST(Ledger, RecordDuelSplitsUnitMass)
{
    for (double g : {0.5, 0.2, 0.0}) {
        auto l = make(2);
        l.record_duel(0, 1, g);
        EXPECT_DOUBLE_EQ(l.wins(0, 1), 0.5 + g);
        EXPECT_DOUBLE_EQ(l.wins(1, 0), 0.5 - g);
        EXPECT_DOUBLE_EQ(l.counts(0, 1), 1.0);
        EXPECT_DOUBLE_EQ(l.counts(1, 0), 1.0);
    }
}

TEST(Ledger, RecordDuelRejectsBadInput)
{
    auto l = make(2);
    EXPECT_THROW(l.record_duel(0, 2, 0.5), std::out_of_range);
    EXPECT_THROW(l.record_duel(0, 0, 0.5), std::invalid_argument);
    EXPECT_THROW(l.record_duel(0, 1, 0.6), std::invalid_argument);
    EXPECT_THROW(l.record_duel(0, 1, -0.1), std::invalid_argument);
    EXPECT_THROW(l.record_tie(1, 3), std::out_of_range);
}

TEST(Ledger, TiesAddHalfToEachSide)
{
    auto l = make(2);
    l.record_tie(0, 1);
    EXPECT_DOUBLE_EQ(l.wins(0, 1), 0.5);
    EXPECT_DOUBLE_EQ(l.wins(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(l.counts(0, 1), 1.0);
    l.record_tie(0, 1);
    EXPECT_DOUBLE_EQ(l.wins(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(l.counts(0, 1), 2.0);

    auto m = make(2);
    m.record_tie(0, 1);
    m.record_duel(0, 1, 0.5);
    EXPECT_DOUBLE_EQ(m.mu_hat(0, 1), 1.5 / 2.0);
}

TEST(Ledger, PairStatsBounds)
{
    duelopt::SquareMatrix w(2), n(2);
    w(0, 1) = 7;
    w(1, 0) = 3;
    n(0, 1) = n(1, 0) = 10;
    PreferenceLedger l({PromptId("a"), PromptId("b")}, w, n);
    const auto s = l.pair_stats(0, 1, 100, 1.2);
    const double bonus = std::sqrt(1.2 * std::log(100.0) / 10.0);
    EXPECT_DOUBLE_EQ(s.mu_hat, 0.7);
    EXPECT_NEAR(s.upper, 0.7 + bonus, 1e-12);
    EXPECT_NEAR(s.lower, 0.7 - bonus, 1e-12);
    // Rounded hand values; the exact bonus is 0.743384.
    EXPECT_NEAR(s.upper, 1.44337, 5e-5);
    EXPECT_NEAR(s.lower, -0.04337, 5e-5);
    EXPECT_NEAR(s.gap, 0.2, 1e-12);

    const auto unseen = make(2).pair_stats(0, 1, 5, 1.2);
    EXPECT_EQ(unseen.mu_hat, 0.5);
    EXPECT_EQ(unseen.gap, 0.5);
    EXPECT_NEAR(unseen.upper - 0.5, std::sqrt(1.2 * std::log(5.0)), 1e-12);

    duelopt::SquareMatrix w2(2), n2(2);
    w2(0, 1) = w2(1, 0) = 5;
    n2(0, 1) = n2(1, 0) = 10;
    const auto flat = PreferenceLedger({PromptId("a"), PromptId("b")}, w2, n2).pair_stats(0, 1, 1, 1.2);
    EXPECT_EQ(flat.upper, 0.5);
    EXPECT_EQ(flat.lower, 0.5);

    EXPECT_THROW(l.pair_stats(0, 1, 0.5, 1.2), std::invalid_argument);
    EXPECT_THROW(l.pair_stats(0, 1, 2, 0.0), std::invalid_argument);
}

TEST(Ledger, CopelandBordaHandExample)
{
    const auto l = from_rates({{0.5, 0.7, 0.6}, {0.3, 0.5, 0.8}, {0.4, 0.2, 0.5}});
    EXPECT_EQ(l.copeland_scores(), (std::vector<int>{2, 1, 0}));
    EXPECT_NEAR(l.borda_scores()[0], 0.65, 1e-12);
    EXPECT_EQ(l.current_best(), 0u);

    EXPECT_EQ(make(3).copeland_scores(), (std::vector<int>{0, 0, 0}));
    for (double f : make(3).borda_scores()) EXPECT_EQ(f, 0.5);
    EXPECT_THROW(make(1).borda_scores(), std::invalid_argument);
    EXPECT_EQ(make(1).current_best(), 0u);
}

TEST(Ledger, CurrentBestBreaksCopelandTiesByBorda)
{
    // C = [1, 1, 1] cycle; Borda decides.
    const auto l = from_rates({{0.5, 0.6, 0.4}, {0.4, 0.5, 0.9}, {0.6, 0.1, 0.5}});
    EXPECT_EQ(l.copeland_scores(), (std::vector<int>{1, 1, 1}));
    EXPECT_EQ(l.current_best(), 1u);
    // Full tie falls back to the lowest index.
    EXPECT_EQ(make(4).current_best(), 0u);
}

TEST(Ledger, ExpandAndRemoveKeepSurvivingStats)
{
    auto l = make(2);
    l.record_duel(0, 1, 0.5);
    const auto idx = l.expand(PromptId("new"));
    EXPECT_EQ(idx, 2u);
    EXPECT_EQ(l.size(), 3u);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(l.wins(2, j), 0.0);
        EXPECT_EQ(l.counts(j, 2), 0.0);
    }
    EXPECT_THROW(l.expand(PromptId("new")), std::invalid_argument);

    const auto before = l;
    l.record_duel(2, 0, 0.5);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            const bool touched = (i == 2 && j == 0) || (i == 0 && j == 2);
            if (!touched) {
                EXPECT_EQ(l.wins(i, j), before.wins(i, j));
                EXPECT_EQ(l.counts(i, j), before.counts(i, j));
            }
        }
    }

    auto r = l;
    r.remove({2});
    EXPECT_EQ(r.size(), 2u);
    EXPECT_EQ(r.wins(0, 1), 1.0);
    r.remove({0});
    EXPECT_EQ(r.arm_ids(), (std::vector<PromptId>{PromptId("a1")}));
    EXPECT_THROW(r.remove({0}), std::invalid_argument);
}

// Property: conservation and symmetry under random update sequences.
TEST(LedgerProperty, MassIsConserved)
{
    std::mt19937_64 gen(11);
    auto l = make(6);
    std::uniform_int_distribution<std::size_t> arm(0, 5);
    std::uniform_real_distribution<double> gamma(0.0, 0.5);
    for (int step = 0; step < 20000; ++step) {
        std::size_t i = arm(gen), j = arm(gen);
        if (i == j) continue;
        if (step % 3 == 0) {
            l.record_tie(i, j);
        } else {
            l.record_duel(i, j, gamma(gen));
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(l.wins(i, i), 0.0);
        EXPECT_EQ(l.counts(i, i), 0.0);
        for (std::size_t j = 0; j < 6; ++j) {
            EXPECT_EQ(l.counts(i, j), l.counts(j, i));
            EXPECT_GE(l.wins(i, j), 0.0);
            if (i != j) {
                EXPECT_NEAR(l.wins(i, j) + l.wins(j, i), l.counts(i, j), 1e-9);
                const auto s = l.pair_stats(i, j, 50, 1.2);
                EXPECT_NEAR(s.upper - s.mu_hat, s.mu_hat - s.lower, 1e-12);
                EXPECT_EQ(s.gap, std::abs(s.mu_hat - 0.5));
            }
            if (i < j) total += l.counts(i, j);
        }
    }
    EXPECT_DOUBLE_EQ(l.total_mass(), total);
}

// Property: Copeland scores from an independent event-count oracle, and
// removal matches a recount on the surviving subset.
TEST(LedgerProperty, CopelandMatchesEventOracle)
{
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + gen() % 11;
        auto l = make(k);
        std::vector<std::vector<int>> won(k, std::vector<int>(k, 0));
        std::vector<std::vector<int>> seen(k, std::vector<int>(k, 0));
        const int events = static_cast<int>(gen() % 200);
        for (int e = 0; e < events; ++e) {
            const std::size_t i = gen() % k, j = gen() % k;
            if (i == j) continue;
            l.record_duel(i, j, 0.5);
            ++won[i][j];
            ++seen[i][j];
            ++seen[j][i];
        }
        std::vector<std::size_t> alive;
        for (std::size_t i = 0; i < k; ++i) {
            if (k == 2 || gen() % 3 != 0) alive.push_back(i);
        }
        if (alive.empty()) alive.push_back(0);
        std::set<duelopt::ArmIndex> gone;
        for (std::size_t i = 0; i < k; ++i) {
            if (std::find(alive.begin(), alive.end(), i) == alive.end()) gone.insert(i);
        }
        l.remove(gone);
        ASSERT_EQ(l.size(), alive.size());
        const auto c = l.copeland_scores();
        for (std::size_t a = 0; a < alive.size(); ++a) {
            int expect = 0;
            for (std::size_t b = 0; b < alive.size(); ++b) {
                const auto i = alive[a], j = alive[b];
                // 2 * wins > seen  <=>  win rate > 1/2
                if (i != j && seen[i][j] > 0 && 2 * won[i][j] > seen[i][j]) ++expect;
            }
            EXPECT_EQ(c[a], expect);
        }
    }
}

TEST(LedgerProperty, BestIsScaleInvariant)
{
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 50; ++trial) {
        auto l = make(5);
        for (int e = 0; e < 40; ++e) {
            const std::size_t i = gen() % 5, j = gen() % 5;
            if (i != j) l.record_duel(i, j, 0.1 * static_cast<double>(gen() % 6));
        }
        duelopt::SquareMatrix w(5), n(5);
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 5; ++j) {
                w(i, j) = 3.0 * l.wins(i, j);
                n(i, j) = 3.0 * l.counts(i, j);
            }
        }
        PreferenceLedger scaled(l.arm_ids(), w, n);
        EXPECT_EQ(scaled.current_best(), l.current_best());
    }
}

} // namespace
