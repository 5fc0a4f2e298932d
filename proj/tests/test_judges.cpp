#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "duelopt/judges.hpp"

namespace {

using namespace duelopt;

WorldModel two_arm_world(double mu01)
{
    return WorldModel::explicit_matrix({PromptId("a"), PromptId("b")}, {{0.5, mu01}, {1.0 - mu01, 0.5}},
                                       std::vector<double>{0.9, 0.4});
}

PreferenceLedger ledger_ab()
{
    return PreferenceLedger({PromptId("a"), PromptId("b")});
}

DuelTicket ticket(std::size_t m, std::vector<bool> swapped = {})
{
    DuelTicket t;
    t.duel_id = 1;
    t.first = 0;
    t.second = 1;
    t.first_id = PromptId("a");
    t.second_id = PromptId("b");
    for (std::size_t k = 0; k < m; ++k) t.batch.push_back(k);
    t.swapped = swapped.empty() ? std::vector<bool>(m, false) : swapped;
    return t;
}

double first_share(const DuelOutcome& o)
{
    double n = 0;
    for (const auto& j : o.per_input) n += j.winner == Verdict::first;
    return n / static_cast<double>(o.per_input.size());
}

TEST(Judges, SourceNamesRoundTrip)
{
    for (auto s : {JudgeSource::answer, JudgeSource::reasoning, JudgeSource::label, JudgeSource::simulated,
                   JudgeSource::human}) {
        EXPECT_EQ(judge_source_from_string(to_string(s)), s);
    }
    EXPECT_THROW(judge_source_from_string("oracle"), std::invalid_argument);
}

TEST(Judges, MajorityTiesOnEqualCounts)
{
    using J = InputJudgment;
    EXPECT_EQ(majority({J{Verdict::first}, J{Verdict::second}}), Verdict::tie);
    EXPECT_EQ(majority({J{Verdict::first}, J{Verdict::tie}}), Verdict::first);
    EXPECT_EQ(majority({J{Verdict::second}, J{Verdict::second}, J{Verdict::first}}), Verdict::second);
    EXPECT_EQ(majority({}), Verdict::tie);
}

TEST(Judges, SimulatedCertainWinner)
{
    const auto w = two_arm_world(1.0);
    SimulatedJudge judge(w, {1.0});
    Rng rng(1);
    const auto o = judge.judge(ticket(5), rng);
    ASSERT_EQ(o.per_input.size(), 5u);
    for (const auto& j : o.per_input) {
        EXPECT_EQ(j.winner, Verdict::first);
        EXPECT_EQ(j.source, JudgeSource::simulated);
    }
    EXPECT_EQ(o.aggregate, Verdict::first);
}

TEST(Judges, SimulatedWinRates)
{
    Rng rng(2);
    const auto fair = two_arm_world(0.5);
    SimulatedJudge coin(fair, {1.0});
    EXPECT_NEAR(first_share(coin.judge(ticket(10000), rng)), 0.5, 0.015);

    const auto skew = two_arm_world(0.8);
    SimulatedJudge noisy(skew, {0.9});
    // 0.8 * 0.9 + 0.2 * 0.1
    EXPECT_NEAR(first_share(noisy.judge(ticket(10000), rng)), 0.74, 0.015);

    EXPECT_THROW(SimulatedJudge(skew, {0.4}), std::invalid_argument);
}

double majority_probability(std::size_t m, double p)
{
    // P(first strictly more wins than second) with no ties per input.
    double total = 0.0;
    for (std::size_t k = 0; k <= m; ++k) {
        if (2 * k > m) {
            total += std::tgamma(m + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(m - k + 1.0)) * std::pow(p, k) *
                     std::pow(1 - p, m - k);
        }
    }
    return total;
}

TEST(JudgesProperty, AggregateMatchesBinomialMajority)
{
    Rng rng(3);
    for (double mu : {0.6, 0.8}) {
        const auto w = two_arm_world(mu);
        SimulatedJudge judge(w, {1.0});
        for (std::size_t m : {1u, 3u, 5u}) {
            int wins = 0;
            const int trials = 20000;
            for (int i = 0; i < trials; ++i) {
                wins += judge.judge(ticket(m), rng).aggregate == Verdict::first;
            }
            EXPECT_NEAR(static_cast<double>(wins) / trials, majority_probability(m, mu), 0.02)
                << "mu=" << mu << " m=" << m;
        }
    }
}

TEST(Judges, OracleFollowsUtility)
{
    const auto w = two_arm_world(0.3); // matrix disagrees; oracle uses utilities
    OracleJudge oracle(w);
    Rng rng(4);
    const auto o = oracle.judge(ticket(4), rng);
    for (const auto& j : o.per_input) EXPECT_EQ(j.winner, Verdict::first);
    EXPECT_EQ(o.aggregate, Verdict::first);

    const auto tied = WorldModel::explicit_matrix({PromptId("a"), PromptId("b")}, {{0.5, 0.5}, {0.5, 0.5}},
                                                  std::vector<double>{0.6, 0.6});
    OracleJudge even(tied);
    for (const auto& j : even.judge(ticket(3), rng).per_input) EXPECT_EQ(j.winner, Verdict::tie);

    const auto no_util =
        WorldModel::explicit_matrix({PromptId("a"), PromptId("b")}, {{0.5, 0.5}, {0.5, 0.5}}, std::nullopt);
    EXPECT_THROW(OracleJudge{no_util}, std::invalid_argument);
}

TEST(Judges, TicketOrderIsFair)
{
    Rng rng(5);
    const auto l = ledger_ab();
    std::size_t swapped = 0, total = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto t = make_ticket(i, 1, 1, DuelChoice{0, 1}, l, 5, 100, rng);
        for (bool s : t.swapped) swapped += s;
        total += t.swapped.size();
        for (auto x : t.batch) ASSERT_LT(x, 100u);
    }
    EXPECT_NEAR(static_cast<double>(swapped) / total, 0.5, 0.02);
    EXPECT_THROW(make_ticket(0, 1, 1, DuelChoice{0, 1}, l, 0, 100, rng), std::invalid_argument);
    EXPECT_THROW(make_ticket(0, 1, 1, DuelChoice{1, 1}, l, 1, 100, rng), std::invalid_argument);
}

// Inner judge that always returns the same verdict.
class FixedJudge : public Judge {
public:
    explicit FixedJudge(Verdict v) : v_(v) {}
    int calls = 0;
    std::size_t last_batch = 0;
    DuelOutcome judge(const DuelTicket& t, Rng&) override
    {
        ++calls;
        last_batch = t.batch.size();
        return make_outcome(t.duel_id, std::vector<InputJudgment>(t.batch.size(), {v_, JudgeSource::simulated}));
    }

private:
    Verdict v_;
};

TEST(Judges, PartialLabelsDecideLabeledInputs)
{
    MapLabelSet labels;
    labels.table[0] = {{PromptId("a"), true}, {PromptId("b"), false}};
    labels.table[1] = {{PromptId("a"), true}, {PromptId("b"), true}};
    labels.table[2] = {{PromptId("a"), false}, {PromptId("b"), true}};
    FixedJudge inner(Verdict::second);
    // 10 inputs at r = 0.3: inputs 0..2 labeled.
    PartialLabelJudge judge(inner, labels, 0.3, 10);
    Rng rng(6);
    const auto o = judge.judge(ticket(5), rng);
    ASSERT_EQ(o.per_input.size(), 5u);
    EXPECT_EQ(o.per_input[0], (InputJudgment{Verdict::first, JudgeSource::label}));
    EXPECT_EQ(o.per_input[1], (InputJudgment{Verdict::tie, JudgeSource::label}));
    EXPECT_EQ(o.per_input[2], (InputJudgment{Verdict::second, JudgeSource::label}));
    EXPECT_EQ(o.per_input[3], (InputJudgment{Verdict::second, JudgeSource::simulated}));
    EXPECT_EQ(o.per_input[4], (InputJudgment{Verdict::second, JudgeSource::simulated}));
    EXPECT_EQ(inner.last_batch, 2u);

    MapLabelSet sparse;
    PartialLabelJudge missing(inner, sparse, 1.0, 10);
    EXPECT_THROW(missing.judge(ticket(1), rng), NotFoundError);
    EXPECT_THROW(PartialLabelJudge(inner, sparse, 1.5, 10), std::invalid_argument);
}

TEST(Judges, ZeroLabelFractionIsTransparent)
{
    const auto w = two_arm_world(0.7);
    SimulatedJudge a(w, {0.8});
    SimulatedJudge b(w, {0.8});
    WorldLabelSet labels(w);
    PartialLabelJudge wrapped(b, labels, 0.0, 100);
    Rng r1(7), r2(7);
    for (int i = 0; i < 20; ++i) {
        EXPECT_EQ(a.judge(ticket(6), r1), wrapped.judge(ticket(6), r2));
    }
}

TEST(Judges, UnswapTable)
{
    // (x_wins, swapped) -> attributed winner
    EXPECT_EQ(unswap(true, false), Verdict::first);
    EXPECT_EQ(unswap(false, false), Verdict::second);
    EXPECT_EQ(unswap(true, true), Verdict::second);
    EXPECT_EQ(unswap(false, true), Verdict::first);
    // Human A/B/tie with and without swap.
    EXPECT_EQ(human_verdict(HumanChoice::A, false), Verdict::first);
    EXPECT_EQ(human_verdict(HumanChoice::B, false), Verdict::second);
    EXPECT_EQ(human_verdict(HumanChoice::tie, false), Verdict::tie);
    EXPECT_EQ(human_verdict(HumanChoice::A, true), Verdict::second);
    EXPECT_EQ(human_verdict(HumanChoice::B, true), Verdict::first);
    EXPECT_EQ(human_verdict(HumanChoice::tie, true), Verdict::tie);
}

// Property: showing the preferred arm in either slot and answering for it
// always credits that arm.
TEST(JudgesProperty, SwapRoundTripIsIdentity)
{
    for (bool swapped : {false, true}) {
        for (Verdict truth : {Verdict::first, Verdict::second}) {
            const bool shown_in_x = (truth == Verdict::first) != swapped;
            EXPECT_EQ(unswap(shown_in_x, swapped), truth);
            EXPECT_EQ(human_verdict(shown_in_x ? HumanChoice::A : HumanChoice::B, swapped), truth);
        }
    }
}

TEST(Judges, TemplateRendering)
{
    EXPECT_EQ(render_template("{a} and {b}", {{"a", "x"}, {"b", "y"}}), "x and y");
    EXPECT_EQ(render_template("{{\"winner\": {a}}}", {{"a", "X"}}), "{\"winner\": X}");
    EXPECT_EQ(render_template("{missing}", {}), "{missing}");
    const auto t = JudgeTemplates::load(std::string(DUELOPT_ASSET_DIR) + "/templates");
    EXPECT_NE(t.pairwise.find("{answer_X}"), std::string::npos);
    EXPECT_NE(t.answer_based.find("{question}"), std::string::npos);
    EXPECT_NE(t.reasoning_based.find("{reasoning_Y}"), std::string::npos);
}

HttpResponse reply(const std::string& content, int status = 200)
{
    nlohmann::json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
    return {status, body.dump()};
}

RemoteLlmJudge remote(Transport transport, int retries = 2, RemoteJudgeOptions opts = {})
{
    EndpointConfig ep;
    ep.url = "http://judge.invalid/v1/chat/completions";
    ep.model = "m";
    ep.max_retries = retries;
    JudgeTemplates tmpl{"X={answer_X} Y={answer_Y}", "ans {answer_X} {answer_Y}", "why {reasoning_X} {reasoning_Y}"};
    auto responses = [](const PromptId& id, std::size_t) { return CandidateResponse{id.value, "r-" + id.value}; };
    auto inputs = [](std::size_t x) { return InputText{"q" + std::to_string(x), ""}; };
    return RemoteLlmJudge(ep, tmpl, std::move(transport), responses, inputs, opts);
}

TEST(Judges, RemoteWinnerMapsThroughSwap)
{
    std::vector<std::string> seen;
    auto judge = remote([&](const HttpRequest& req) {
        seen.push_back(nlohmann::json::parse(req.body)["messages"][0]["content"].get<std::string>());
        return reply(R"({"reasoning": "x is better", "winner": "X"})");
    });
    Rng rng(1);
    const auto o = judge.judge(ticket(2, {false, true}), rng);
    EXPECT_EQ(o.per_input[0].winner, Verdict::first);
    EXPECT_EQ(o.per_input[1].winner, Verdict::second);
    EXPECT_EQ(o.per_input[0].source, JudgeSource::answer);
    ASSERT_EQ(seen.size(), 2u);
    EXPECT_EQ(seen[0], "X=a Y=b");
    EXPECT_EQ(seen[1], "X=b Y=a");
}

TEST(Judges, RemoteMalformedDegradesToTie)
{
    int calls = 0;
    auto judge = remote(
        [&](const HttpRequest&) {
            ++calls;
            return reply("I cannot decide");
        },
        2);
    Rng rng(1);
    const auto o = judge.judge(ticket(1), rng);
    EXPECT_EQ(calls, 3);
    EXPECT_EQ(o.per_input[0], (InputJudgment{Verdict::tie, JudgeSource::answer}));
    EXPECT_EQ(o.warnings, 1u);
}

TEST(Judges, RemoteRetriesTransientFailures)
{
    int calls = 0;
    auto judge = remote([&](const HttpRequest&) {
        if (++calls < 3) return HttpResponse{503, "busy"};
        return reply(R"({"winner": "Y"})");
    });
    Rng rng(1);
    EXPECT_EQ(judge.judge(ticket(1), rng).per_input[0].winner, Verdict::second);
    EXPECT_EQ(calls, 3);

    auto down = remote([](const HttpRequest&) -> HttpResponse { throw TransportError("refused"); });
    EXPECT_THROW(down.judge(ticket(1), rng), TransportError);

    auto denied = remote([](const HttpRequest&) { return HttpResponse{401, "no"}; });
    EXPECT_THROW(denied.judge(ticket(1), rng), AuthError);
}

TEST(Judges, RemoteSplitJudgeUsesReasoningOnEqualAnswers)
{
    EndpointConfig ep;
    ep.url = "http://judge.invalid";
    JudgeTemplates tmpl{"pair", "ans", "why"};
    std::vector<std::string> seen;
    auto transport = [&](const HttpRequest& req) {
        seen.push_back(nlohmann::json::parse(req.body)["messages"][0]["content"].get<std::string>());
        return reply(R"({"winner": "X"})");
    };
    // Inputs 0 give equal answers, input 1 different ones.
    auto responses = [](const PromptId& id, std::size_t x) {
        return CandidateResponse{x == 0 ? "42" : id.value, "r"};
    };
    RemoteLlmJudge judge(ep, tmpl, transport, responses, [](std::size_t) { return InputText{}; },
                         RemoteJudgeOptions{true, false});
    Rng rng(1);
    const auto o = judge.judge(ticket(2), rng);
    EXPECT_EQ(o.per_input[0].source, JudgeSource::reasoning);
    EXPECT_EQ(o.per_input[1].source, JudgeSource::answer);
    EXPECT_EQ(seen, (std::vector<std::string>{"why", "ans"}));
}

TEST(Judges, RemoteParallelKeepsInputOrder)
{
    std::atomic<int> calls{0};
    // Always X: the first arm wins exactly on the unswapped inputs.
    auto transport = [&](const HttpRequest&) {
        ++calls;
        return reply(R"({"winner": "X"})");
    };
    auto judge = remote(transport, 0, RemoteJudgeOptions{false, true});
    Rng rng(1);
    std::vector<bool> swaps;
    for (int k = 0; k < 8; ++k) swaps.push_back(k % 3 == 0);
    const auto o = judge.judge(ticket(8, swaps), rng);
    EXPECT_EQ(calls.load(), 8);
    for (std::size_t k = 0; k < 8; ++k) {
        EXPECT_EQ(o.per_input[k].winner, swaps[k] ? Verdict::second : Verdict::first);
    }
}

TEST(Judges, HumanQueue)
{
    HumanJudgeQueue q;
    auto render = [](const PromptId& id, std::size_t x) { return "out-" + id.value + "-" + std::to_string(x); };
    q.enqueue(ticket(1, {true}), render);
    EXPECT_THROW(q.enqueue(ticket(1), render), ConflictError);
    const auto items = q.pending();
    ASSERT_EQ(items.size(), 1u);
    // Arm b is shown as A because of the swap; no arm ids in the item.
    EXPECT_EQ(items[0].payload_a, "out-b-0");
    EXPECT_EQ(items[0].payload_b, "out-a-0");
    EXPECT_THROW(q.check(2, 0), NotFoundError);
    EXPECT_THROW(q.check(1, 3), NotFoundError);
    const auto done = q.submit(1, 0, HumanChoice::A);
    ASSERT_TRUE(done.has_value());
    EXPECT_EQ(done->second.per_input[0], (InputJudgment{Verdict::second, JudgeSource::human}));
    EXPECT_FALSE(q.has_pending());

    q.enqueue([] {
        auto t = ticket(2);
        t.duel_id = 5;
        return t;
    }(), render);
    EXPECT_FALSE(q.submit(5, 1, HumanChoice::tie).has_value());
    EXPECT_THROW(q.submit(5, 1, HumanChoice::A), ConflictError);
    EXPECT_EQ(q.pending().size(), 1u);
    const auto second = q.submit(5, 0, HumanChoice::B);
    ASSERT_TRUE(second.has_value());
    EXPECT_EQ(second->second.per_input[1].winner, Verdict::tie);
    EXPECT_EQ(second->second.per_input[0].winner, Verdict::second);
    EXPECT_THROW(human_choice_from_string("C"), std::invalid_argument);
}

} // namespace
