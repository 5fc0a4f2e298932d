#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "duelopt/engine.hpp"

namespace {

using namespace duelopt;

RunConfig sim_config(std::uint64_t seed = 3)
{
    RunConfig c;
    c.seed = seed;
    c.rounds = 30;
    c.duels_per_round = 10;
    c.world.latent.k = 8;
    c.world.latent.tau = 0.1;
    c.judge.accuracy = 0.9;
    c.batch.mode = BatchMode::adaptive;
    c.batch.m_max = 6;
    return c;
}

TEST(Engine, SingleRoundHandTrace)
{
    RunConfig c;
    c.rounds = 1;
    c.duels_per_round = 1;
    c.batch.fixed_m = 5;
    c.world.kind = WorldKind::explicit_matrix;
    c.world.mu = {{0.5, 1.0}, {0.0, 0.5}};
    Engine e(c);
    const auto res = e.run();
    EXPECT_EQ(res.final_best.id, simulated_arm_id(0));
    EXPECT_EQ(e.state().ledger.wins(0, 1), 5.0);
    EXPECT_EQ(e.state().ledger.wins(1, 0), 0.0);
    EXPECT_EQ(e.state().ledger.counts(0, 1), 5.0);
    EXPECT_EQ(e.state().history.size(), 5u);
    EXPECT_TRUE(e.finished());
}

TEST(Engine, RunsExactlyTRoundsWithoutStopping)
{
    auto c = sim_config();
    Engine e(c);
    e.run();
    ASSERT_EQ(e.state().trace.size(), c.rounds);
    for (std::size_t r = 0; r < c.rounds; ++r) EXPECT_EQ(e.state().trace[r].round, r + 1);
    EXPECT_EQ(e.state().t, c.rounds * c.duels_per_round);
    EXPECT_FALSE(e.state().stopped_early);
    EXPECT_THROW(e.next_ticket(), std::logic_error);
}

TEST(Engine, StoppingEndsEarlyAtRoundBoundary)
{
    auto c = sim_config();
    c.world.latent.min_gap = 0.2;
    c.stopping.pac_trigger = true;
    c.stopping.delta = 0.2;
    c.rounds = 500;
    Engine e(c);
    e.run();
    EXPECT_TRUE(e.state().stopped_early);
    EXPECT_LT(e.state().trace.size(), c.rounds);
    EXPECT_EQ(e.state().t % c.duels_per_round, 0u);
    EXPECT_TRUE(e.state().stopping.pac_met);
}

TEST(Engine, FullDeterminism)
{
    Engine a(sim_config(11)), b(sim_config(11)), other(sim_config(12));
    a.run();
    b.run();
    other.run();
    EXPECT_EQ(a.duel_log(), b.duel_log());
    EXPECT_TRUE(a.state() == b.state());
    EXPECT_NE(a.duel_log(), other.duel_log());
}

TEST(Engine, SnapshotRoundTripIsLossless)
{
    auto c = sim_config();
    c.mutation.mode = MutationMode::latent;
    c.mutation.period = 4;
    c.mutation.n_new = 3;
    c.mutation.n_prune = 2;
    Engine fresh(c);
    EXPECT_TRUE(Engine::restore(fresh.snapshot()).state() == fresh.state());
    fresh.run_until(9);
    (void)fresh.next_ticket(); // in-flight duel survives too
    const auto copy = Engine::restore(fresh.snapshot().dump());
    EXPECT_TRUE(copy.state() == fresh.state());
    EXPECT_EQ(copy.snapshot(), fresh.snapshot());
}

TEST(Engine, ResumeMidRunGivesIdenticalLog)
{
    for (bool mutate : {false, true}) {
        auto c = sim_config(21);
        if (mutate) {
            c.mutation.mode = MutationMode::latent;
            c.mutation.period = 5;
            c.mutation.n_new = 4;
            c.mutation.n_prune = 4;
        }
        Engine whole(c);
        whole.run();

        Engine first(c);
        first.run_until(15);
        EXPECT_EQ(first.state().round, 16u);
        const std::string text = first.snapshot().dump(2);
        auto resumed = Engine::restore(text);
        resumed.run();
        EXPECT_EQ(resumed.duel_log(), whole.duel_log());
        EXPECT_TRUE(resumed.state() == whole.state());
    }
}

TEST(Engine, RestoreRejectsBadDocuments)
{
    Engine e(sim_config());
    e.run_until(2);
    const std::string good = e.snapshot().dump();
    EXPECT_THROW(Engine::restore(std::string("{\"schema_version\": 1, ")), SnapshotError);
    EXPECT_THROW(Engine::restore(good.substr(0, good.size() / 2)), SnapshotError);
    EXPECT_THROW(Engine::restore(std::string("[]")), SnapshotError);

    auto j = e.snapshot();
    j["schema_version"] = 99;
    EXPECT_THROW(Engine::restore(j), SnapshotError);

    j = e.snapshot();
    j["state"]["ledger"]["wins"] = nlohmann::json::array({1, 2});
    EXPECT_THROW(Engine::restore(j), SnapshotError);

    j = e.snapshot();
    j["state"]["pool"].erase(0);
    EXPECT_THROW(Engine::restore(j), SnapshotError);

    j = e.snapshot();
    j["state"]["duel_log"] = "nope";
    EXPECT_THROW(Engine::restore(j), SnapshotError);
}

double ledger_mass(const PreferenceLedger& l)
{
    double total = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
        for (std::size_t j = 0; j < l.size(); ++j) total += l.wins(i, j);
    }
    return total;
}

TEST(Engine, ConservationAndCallAccounting)
{
    auto c = sim_config(5);
    c.judge.label_fraction = 0.3;
    Engine e(c);
    e.run();
    const auto& s = e.state();
    EXPECT_NEAR(ledger_mass(s.ledger), static_cast<double>(s.history.size()), 1e-9);
    EXPECT_NEAR(s.ledger.total_mass(), static_cast<double>(s.history.size()), 1e-9);
    std::map<std::uint64_t, std::size_t> batch;
    for (const auto& r : s.history) batch[r.duel_id] = r.m;
    std::size_t sum = 0;
    for (const auto& [id, m] : batch) sum += m;
    EXPECT_EQ(batch.size(), s.t);
    EXPECT_EQ(s.cost.judge_calls, sum);
    EXPECT_EQ(s.cost.judge_calls, s.history.size());
    EXPECT_EQ(s.cost.prediction_calls, 0u);
}

TEST(Engine, AggregateFoldingAddsOneUnitPerDuel)
{
    auto c = sim_config(6);
    c.fold = FoldMode::aggregate;
    Engine e(c);
    e.run();
    EXPECT_NEAR(e.state().ledger.total_mass(), static_cast<double>(e.state().t), 1e-9);
    EXPECT_GT(e.state().history.size(), e.state().t);
}

TEST(Engine, ReasoningSourceIsDiscounted)
{
    // A single manual fold with a reasoning-sourced win.
    RunConfig c;
    c.rounds = 1;
    c.duels_per_round = 1;
    c.world.kind = WorldKind::explicit_matrix;
    c.world.mu = {{0.5, 0.5}, {0.5, 0.5}};
    Engine e(c);
    const auto t = e.next_ticket();
    EXPECT_EQ(e.next_ticket(), t);
    e.fold(t, make_outcome(t.duel_id, {{Verdict::first, JudgeSource::reasoning}}));
    EXPECT_NEAR(e.state().ledger.wins(t.first, t.second), 0.7, 1e-12);
    EXPECT_NEAR(e.state().ledger.wins(t.second, t.first), 0.3, 1e-12);
    EXPECT_EQ(e.state().history[0].gamma, 0.2);
}

TEST(Engine, FoldRejectsUnknownOrMismatchedTickets)
{
    Engine e(sim_config());
    auto t = e.next_ticket();
    auto bogus = t;
    bogus.duel_id += 7;
    EXPECT_THROW(e.fold(bogus, make_outcome(bogus.duel_id, {})), NotFoundError);
    EXPECT_THROW(e.fold(t, make_outcome(t.duel_id, {})), std::invalid_argument);
    std::vector<InputJudgment> ties(t.batch.size());
    e.fold(t, make_outcome(t.duel_id, ties));
    EXPECT_THROW(e.fold(t, make_outcome(t.duel_id, ties)), NotFoundError);
}

TEST(Engine, DuelLogCsvRoundTrip)
{
    Engine e(sim_config(8));
    e.run_until(5);
    const auto text = e.duel_log();
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "round,duel_id,arm_i,arm_j,input_idx,winner,source,gamma,m_t,epsilon_t,pac_met");
    EXPECT_EQ(parse_duel_log_csv(text), e.state().history);
    EXPECT_THROW(parse_duel_log_csv("a,b\n"), ParseError);
}

TEST(Engine, PredictedCallBudget)
{
    EXPECT_EQ(predicted_call_budget(30, 0, 50, 100).dueling, 1500u);
    for (std::uint64_t n : {0u, 10u, 200u}) {
        const auto b = predicted_call_budget(30, n, 50, n);
        EXPECT_EQ(b.dueling, b.supervised + 30 * 50);
        EXPECT_EQ(predicted_call_budget(30, 0, 50, n).dueling, 1500u);
    }
}

TEST(Engine, MutateNowRequiresIdleEngine)
{
    auto c = sim_config();
    Engine plain(c);
    EXPECT_THROW(plain.mutate_now(), std::invalid_argument);
    c.mutation.mode = MutationMode::latent;
    c.mutation.n_new = 2;
    Engine e(c);
    (void)e.next_ticket();
    EXPECT_THROW(e.mutate_now(), std::logic_error);
    e.step();
    const auto before = e.state().pool.size();
    const auto res = e.mutate_now();
    EXPECT_EQ(e.state().pool.size(), before + 2);
    ASSERT_EQ(e.state().events.size(), 1u);
    EXPECT_EQ(e.state().events[0].after_duels, e.state().t);
    EXPECT_EQ(e.state().events[0].added.size(), res.added.size());
}

// Live mode against a stub endpoint: generator echoes the system prompt,
// the judge always prefers the response shown as X.
class LiveEngine : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = std::filesystem::temp_directory_path() / ("duelopt_live_" + std::to_string(::getpid()));
        std::filesystem::create_directories(dir_);
        write("prompts.json", R"(["Answer briefly.", {"id": "careful", "text": "Think carefully."}, "Guess."])");
        write("inputs.json", R"(["q0", {"query": "q1", "label": "A"}, {"query": "q2", "context": "ctx"}])");
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }

    void write(const std::string& name, const std::string& text)
    {
        std::ofstream(dir_ / name) << text;
    }

    RunConfig config() const
    {
        RunConfig c;
        c.seed = 4;
        c.rounds = 3;
        c.duels_per_round = 4;
        c.judge.kind = JudgeKind::remote;
        c.judge.endpoint.url = "http://judge.invalid/v1/chat/completions";
        c.live.generator.url = "http://gen.invalid/v1/chat/completions";
        c.live.prompts_file = (dir_ / "prompts.json").string();
        c.live.inputs_file = (dir_ / "inputs.json").string();
        c.live.cache_examples = 2;
        c.batch.fixed_m = 2;
        return c;
    }

    EngineHooks hooks()
    {
        EngineHooks h;
        h.transport = [this](const HttpRequest& req) {
            ++calls_[req.url];
            const auto body = nlohmann::json::parse(req.body);
            std::string content;
            if (req.url.find("gen.invalid") != std::string::npos) {
                if (body["messages"].size() == 2) {
                    content = "resp to " + body["messages"][0]["content"].get<std::string>();
                } else {
                    content = R"({"mutated_prompt": "mutated"})";
                }
            } else {
                content = R"({"reasoning": "r", "winner": "X"})";
            }
            nlohmann::json out = {{"choices", {{{"message", {{"content", content}}}}}}};
            return HttpResponse{200, out.dump()};
        };
        h.warn = [this](const std::string& m) { warnings_.push_back(m); };
        return h;
    }

    std::filesystem::path dir_;
    std::map<std::string, int> calls_;
    std::vector<std::string> warnings_;
};

TEST_F(LiveEngine, RunsAgainstStubEndpoints)
{
    Engine e(config(), hooks());
    EXPECT_EQ(e.state().cost.prediction_calls, 6u); // B = 2 for each of 3 prompts
    EXPECT_EQ(e.state().pool[1].id, PromptId("careful"));
    e.run();
    const auto& s = e.state();
    EXPECT_EQ(s.cost.judge_calls, 3u * 4u * 2u);
    EXPECT_EQ(calls_["http://judge.invalid/v1/chat/completions"], 24);
    // At most one generation per (prompt, input).
    EXPECT_LE(s.cost.prediction_calls, 9u);
    EXPECT_EQ(static_cast<int>(s.cost.prediction_calls), calls_["http://gen.invalid/v1/chat/completions"]);
    EXPECT_FALSE(s.world.has_value());
    EXPECT_FALSE(s.trace.back().leader_rank.has_value());
    EXPECT_EQ(e.payload(PromptId("careful"), 1), "resp to Think carefully.");
    EXPECT_EQ(e.input_text(2).context, "ctx");

    // Responses are cached in the snapshot, so resuming makes no new calls.
    const int before = calls_["http://gen.invalid/v1/chat/completions"];
    auto copy = Engine::restore(e.snapshot(), hooks());
    EXPECT_EQ(copy.payload(PromptId("careful"), 1), "resp to Think carefully.");
    EXPECT_EQ(calls_["http://gen.invalid/v1/chat/completions"], before);
}

TEST_F(LiveEngine, LlmMutationCountsCalls)
{
    auto c = config();
    c.mutation.mode = MutationMode::llm;
    c.mutation.period = 1;
    c.mutation.n_new = 2;
    c.mutation.n_prune = 1;
    Engine e(c, hooks());
    e.run();
    EXPECT_EQ(e.state().cost.mutation_calls, 4u); // events after rounds 1 and 2
    EXPECT_EQ(e.state().events.size(), 2u);
    EXPECT_EQ(e.state().pool.size(), 5u);
    // Each new prompt gets B cached predictions.
    EXPECT_GE(e.state().cost.prediction_calls, 6u + 4u * 2u);
}

TEST_F(LiveEngine, UnavailableJudgeAborts)
{
    EngineHooks h = hooks();
    h.transport = [](const HttpRequest& req) -> HttpResponse {
        if (req.url.find("judge") != std::string::npos) return {503, ""};
        nlohmann::json out = {{"choices", {{{"message", {{"content", "x"}}}}}}};
        return {200, out.dump()};
    };
    auto c = config();
    c.judge.endpoint.max_retries = 1;
    Engine e(c, h);
    EXPECT_THROW(e.step(), TransportError);
    // The failed duel stays in flight and the snapshot can resume it.
    ASSERT_TRUE(e.state().in_flight.has_value());
    auto resumed = Engine::restore(e.snapshot(), hooks());
    resumed.run();
    EXPECT_TRUE(resumed.finished());
}

} // namespace
