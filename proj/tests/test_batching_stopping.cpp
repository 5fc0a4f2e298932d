#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "duelopt/batching.hpp"
#include "duelopt/stopping.hpp"

namespace {

using namespace duelopt;

BatchPolicy adaptive(double c, std::size_t m_max, std::size_t m_min = 1)
{
    BatchPolicy p;
    p.mode = BatchMode::adaptive;
    p.c_prime = c;
    p.m_max = m_max;
    p.m_min = m_min;
    return p;
}

TEST(Batching, HandEvaluatedSizes)
{
    EXPECT_EQ(batch_size(adaptive(1, 50), 100, 0.5), 19u);
    EXPECT_EQ(static_cast<std::size_t>(std::ceil(std::log(100.0) / 0.25)), 19u);
    EXPECT_EQ(batch_size(adaptive(1, 10), 100, 0.5), 10u);
    EXPECT_EQ(batch_size(adaptive(1, 50), 1, 0.3), 1u);
    BatchPolicy fixed;
    fixed.fixed_m = 7;
    EXPECT_EQ(batch_size(fixed, 100, 0.01), 7u);
}

TEST(Batching, RequiredSamples)
{
    EXPECT_EQ(required_samples(0.5, 0.05), 8u);
    EXPECT_EQ(required_samples(0.1, 0.05), 185u);
    // Before rounding, halving the gap multiplies the bound by four.
    const double raw = std::log(2.0 / 0.05) / (2.0 * 0.2 * 0.2);
    const double half = std::log(2.0 / 0.05) / (2.0 * 0.1 * 0.1);
    EXPECT_NEAR(half / raw, 4.0, 1e-12);
}

TEST(Batching, RejectsBadArguments)
{
    EXPECT_THROW(batch_size(adaptive(1, 50), 10, 0.0), std::invalid_argument);
    EXPECT_THROW(batch_size(adaptive(1, 50), 10, 0.6), std::invalid_argument);
    EXPECT_THROW(batch_size(adaptive(1, 50), 0.5, 0.3), std::invalid_argument);
    EXPECT_THROW(required_samples(0.0, 0.05), std::invalid_argument);
    EXPECT_THROW(required_samples(0.3, 1.0), std::invalid_argument);
    BatchPolicy bad = adaptive(1, 3, 5);
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

// Property: monotone in t and gap, and the Hoeffding guarantee holds.
TEST(BatchingProperty, MonotoneOverGrid)
{
    const auto wide = adaptive(1, 1000000);
    for (int a = 1; a <= 10; ++a) {
        const double gap = 0.05 * a;
        std::size_t prev = 0;
        for (int b = 1; b <= 10; ++b) {
            const double t = std::pow(10.0, 0.4 * b);
            const auto m = batch_size(wide, t, gap);
            EXPECT_GE(m, prev);
            prev = m;
            if (a > 1) {
                EXPECT_LE(m, batch_size(wide, t, 0.05 * (a - 1)));
            }
            const auto n = required_samples(gap, 0.01 * b);
            EXPECT_LE(2.0 * std::exp(-2.0 * static_cast<double>(n) * gap * gap), 0.01 * b + 1e-15);
        }
    }
}

TEST(Stopping, PacBound)
{
    EXPECT_NEAR(*pac_confidence_bound(50, 0.05), 0.19207, 1e-5);
    EXPECT_NEAR(*pac_confidence_bound(200, 0.05), *pac_confidence_bound(50, 0.05) / 2.0, 1e-12);
    EXPECT_NEAR(*pac_confidence_bound(1, 2.0 / std::exp(2.0)), 1.0, 1e-12);
    EXPECT_FALSE(pac_confidence_bound(0, 0.05).has_value());
}

PreferenceLedger rates_ledger(std::size_t k, double rate, double n)
{
    std::vector<PromptId> ids;
    for (std::size_t i = 0; i < k; ++i) ids.push_back(PromptId("a" + std::to_string(i)));
    SquareMatrix w(k), c(k);
    for (std::size_t j = 1; j < k; ++j) {
        w(0, j) = rate * n;
        w(j, 0) = (1.0 - rate) * n;
        c(0, j) = c(j, 0) = n;
    }
    return PreferenceLedger(ids, w, c);
}

TEST(Stopping, PacMetForClearWinner)
{
    StoppingConfig cfg;
    cfg.delta = 0.05;
    const auto s = check_stopping(rates_ledger(4, 0.9, 100), BehavioralConfig{}, cfg);
    EXPECT_NEAR(*pac_confidence_bound(100, 0.05), 0.13583, 5e-5); // exact 0.135810
    EXPECT_TRUE(s.pac_met);
    EXPECT_TRUE(s.blocking_opponents.empty());
    EXPECT_EQ(*s.leader, PromptId("a0"));
    EXPECT_FALSE(s.stop); // both triggers off
}

TEST(Stopping, UnseenPairBlocks)
{
    auto l = rates_ledger(3, 0.9, 100);
    l.expand(PromptId("fresh"));
    StoppingConfig cfg;
    const auto s = check_stopping(l, BehavioralConfig{}, cfg);
    EXPECT_FALSE(s.pac_met);
    ASSERT_EQ(s.blocking_opponents.size(), 1u);
    EXPECT_EQ(s.blocking_opponents[0].arm, PromptId("fresh"));
    EXPECT_FALSE(s.blocking_opponents[0].lower.has_value());
}

TEST(Stopping, CoverMetWhenEverythingIsCovered)
{
    BehavioralConfig b;
    b.n_min = 0.0;
    StoppingConfig cfg;
    cfg.cover_trigger = true;
    cfg.epsilon_target = 1e-9;
    const auto s = check_stopping(rates_ledger(3, 0.7, 5), b, cfg);
    EXPECT_EQ(s.epsilon_t, 0.0);
    EXPECT_TRUE(s.cover_met);
    EXPECT_TRUE(s.stop);
}

TEST(Stopping, TriggersCombine)
{
    StoppingConfig cfg;
    cfg.pac_trigger = true;
    cfg.cover_trigger = true;
    cfg.epsilon_target = 1e-9;
    BehavioralConfig b;
    b.n_min = 1e9; // nothing covered: infinite radius
    const auto s = check_stopping(rates_ledger(3, 0.95, 200), b, cfg);
    EXPECT_TRUE(s.pac_met);
    EXPECT_FALSE(s.cover_met);
    EXPECT_FALSE(s.stop);
    cfg.cover_trigger = false;
    EXPECT_TRUE(check_stopping(rates_ledger(3, 0.95, 200), b, cfg).stop);
}

TEST(Stopping, BonferroniIsStricter)
{
    StoppingConfig cfg;
    cfg.delta = 0.05;
    // Bound at n=40: 0.2147 (plain) vs 0.2712 (delta / 9); mu_hat 0.73.
    const auto l = rates_ledger(10, 0.73, 40);
    EXPECT_TRUE(check_stopping(l, BehavioralConfig{}, cfg).pac_met);
    cfg.bonferroni = true;
    EXPECT_FALSE(check_stopping(l, BehavioralConfig{}, cfg).pac_met);
}

// Property: more evidence at the same mu_hat never revokes pac_met.
TEST(StoppingProperty, MonotoneInEvidence)
{
    std::mt19937_64 gen(4);
    StoppingConfig cfg;
    cfg.delta = 0.1;
    for (int trial = 0; trial < 300; ++trial) {
        const double rate = 0.5 + 0.5 * static_cast<double>(gen() % 1000) / 1000.0;
        const double n = 1.0 + static_cast<double>(gen() % 200);
        const bool before = check_stopping(rates_ledger(4, rate, n), BehavioralConfig{}, cfg).pac_met;
        const bool after = check_stopping(rates_ledger(4, rate, 2.0 * n), BehavioralConfig{}, cfg).pac_met;
        EXPECT_TRUE(!before || after);
    }
}

} // namespace
