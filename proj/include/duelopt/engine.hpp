#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "duelopt/batching.hpp"
#include "duelopt/behavioral.hpp"
#include "duelopt/config.hpp"
#include "duelopt/evaluation.hpp"
#include "duelopt/judges.hpp"
#include "duelopt/ledger.hpp"
#include "duelopt/live.hpp"
#include "duelopt/mutation.hpp"
#include "duelopt/rng.hpp"
#include "duelopt/samplers.hpp"
#include "duelopt/stopping.hpp"
#include "duelopt/worldmodel.hpp"

#ifndef DUELOPT_ASSET_DIR
#define DUELOPT_ASSET_DIR "assets"
#endif

namespace duelopt {

struct CostMeter {
    std::uint64_t judge_calls = 0;
    std::uint64_t prediction_calls = 0;
    std::uint64_t mutation_calls = 0;

    friend bool operator==(const CostMeter&, const CostMeter&) = default;
};

struct CallBudget {
    std::uint64_t dueling = 0;
    std::uint64_t supervised = 0;
};

/// Call counts for P prompts: duels plus B cached predictions per prompt,
/// against N labeled predictions per prompt for supervised search.
inline CallBudget predicted_call_budget(std::uint64_t prompts, std::uint64_t cached_per_prompt,
                                        std::uint64_t duels_per_round, std::uint64_t labeled)
{
    return {prompts * (cached_per_prompt + duels_per_round), prompts * labeled};
}

/// One per-input judgment as written to the duel log.
struct DuelLogRow {
    std::size_t round = 0;
    std::uint64_t duel_id = 0;
    PromptId arm_i;
    PromptId arm_j;
    std::size_t input = 0;
    std::optional<PromptId> winner; // empty for a tie
    JudgeSource source = JudgeSource::simulated;
    double gamma = 0.5;
    std::size_t m = 1;
    double epsilon_t = 0.0;
    bool pac_met = false;

    friend bool operator==(const DuelLogRow&, const DuelLogRow&) = default;
};

inline const char* duel_log_header() { return "round,duel_id,arm_i,arm_j,input_idx,winner,source,gamma,m_t,epsilon_t,pac_met"; }

inline std::string duel_log_csv(const std::vector<DuelLogRow>& rows)
{
    std::string out = duel_log_header();
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.round) + ',' + std::to_string(r.duel_id) + ',' + r.arm_i.value + ',' + r.arm_j.value +
               ',' + std::to_string(r.input) + ',' + (r.winner ? r.winner->value : std::string("tie")) + ',' +
               std::string(to_string(r.source)) + ',' + format_double(r.gamma) + ',' + std::to_string(r.m) + ',' +
               format_double(r.epsilon_t) + ',' + (r.pac_met ? "true" : "false") + '\n';
    }
    return out;
}

inline std::vector<DuelLogRow> parse_duel_log_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != duel_log_header()) {
        throw ParseError("duel log: unexpected header");
    }
    std::vector<DuelLogRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() != 11) {
            throw ParseError("duel log line " + std::to_string(lineno) + ": expected 11 columns");
        }
        try {
            DuelLogRow r;
            r.round = std::stoull(cells[0]);
            r.duel_id = std::stoull(cells[1]);
            r.arm_i = PromptId(cells[2]);
            r.arm_j = PromptId(cells[3]);
            r.input = std::stoull(cells[4]);
            if (cells[5] != "tie") {
                r.winner = PromptId(cells[5]);
            }
            r.source = judge_source_from_string(cells[6]);
            r.gamma = parse_double(cells[7]);
            r.m = std::stoull(cells[8]);
            r.epsilon_t = parse_double(cells[9]);
            r.pac_met = cells[10] == "true";
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ParseError("duel log line " + std::to_string(lineno) + ": malformed cell");
        }
    }
    return rows;
}

/// Per-round evaluation record. Regret and rank need a world model and are
/// empty in live runs.
struct TraceRow {
    std::size_t round = 0;
    std::uint64_t t = 0; // duels completed at the end of the round
    std::optional<double> r_t;
    std::optional<double> R_t;
    std::optional<double> borda_regret;
    std::optional<std::size_t> leader_rank;
    double epsilon_t = 0.0; // covering radius at the start of the round
    PromptId leader;
    std::size_t pool_size = 0;

    friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

/// Pool change applied after `after_duels` duels.
struct MutationEvent {
    std::uint64_t after_duels = 0;
    std::size_t round = 0;
    std::vector<PromptId> added;
    std::vector<PromptId> removed;

    friend bool operator==(const MutationEvent&, const MutationEvent&) = default;
};

struct RunState {
    std::size_t round = 1;        // current round, rounds + 1 once all are done
    std::uint64_t t = 0;          // duels issued so far
    std::size_t duel_in_round = 0;
    std::uint64_t next_duel_id = 1;
    std::uint64_t next_serial = 0;
    std::vector<PromptRecord> pool; // pool[i] is ledger arm i
    std::vector<PromptRecord> archive;
    PreferenceLedger ledger;
    CostMeter cost;
    StoppingStatus stopping;
    Rng rng;
    std::optional<WorldModel> world;
    std::vector<DuelLogRow> history;
    std::vector<TraceRow> trace;
    std::vector<MutationEvent> events;
    double round_regret = 0.0;
    double cumulative_regret = 0.0;
    double round_start_epsilon = 0.0;
    std::size_t warnings = 0;
    std::size_t mutator_position = 0;
    bool finished = false;
    bool stopped_early = false;
    std::optional<DuelTicket> in_flight;
    std::map<std::string, CandidateResponse> responses;

    friend bool operator==(const RunState&, const RunState&) = default;
};

/// Injection points for everything that talks to the outside world.
struct EngineHooks {
    Transport transport;
    std::string api_key; // applied to every configured endpoint
    AnswersEqual answers_equal;
    std::function<void(const std::string&)> warn;
};

struct RunResult {
    PromptRecord final_best;
    const RunState& state;
};

inline constexpr int kSnapshotSchemaVersion = 1;

/// The optimization loop. Duels are issued one at a time: next_ticket()
/// selects a pair and batch, fold() applies the judged outcome. step() and
/// run() drive both with the configured automatic judge.
class Engine {
public:
    explicit Engine(RunConfig config, EngineHooks hooks = {})
        : config_(std::move(config)), hooks_(std::move(hooks)), cache_mutex_(std::make_unique<std::mutex>())
    {
        config_.validate();
        apply_api_key();
        state_.rng = Rng(config_.seed);
        if (config_.simulated()) {
            init_world();
        } else {
            init_live();
        }
        std::vector<PromptId> ids;
        for (const auto& r : state_.pool) {
            ids.push_back(r.id);
        }
        state_.ledger = PreferenceLedger(ids);
        if (!config_.simulated()) {
            for (const auto& r : state_.pool) {
                precompute_predictions(r.id);
            }
        }
        refresh_stopping();
        state_.round_start_epsilon = state_.stopping.epsilon_t;
    }

    /// Rebuilds an engine from snapshot(). Throws SnapshotError on a schema
    /// mismatch or malformed document; nothing is partially restored.
    static Engine restore(const nlohmann::json& snap, EngineHooks hooks = {});
    static Engine restore(const std::string& text, EngineHooks hooks = {});

    const RunConfig& config() const { return config_; }
    const RunState& state() const { return state_; }
    bool finished() const { return state_.finished; }
    std::size_t n_inputs() const { return config_.simulated() ? config_.world.n_inputs : inputs_.size(); }
    const std::vector<LiveInput>& inputs() const { return inputs_; }

    const PromptRecord& final_best() const { return state_.pool.at(state_.ledger.current_best()); }

    /// Selects the next duel. Returns the in-flight ticket unchanged if one
    /// is pending.
    DuelTicket next_ticket()
    {
        detail::ensure<std::logic_error>(!state_.finished, "next_ticket: run is finished");
        if (state_.in_flight) {
            return *state_.in_flight;
        }
        const std::uint64_t t = state_.t + 1;
        const auto& ledger = state_.ledger;
        const DuelChoice choice = select_pair(ledger, static_cast<double>(t), config_.sampler, state_.rng);
        const double n = ledger.counts(choice.first, choice.second);
        const double gap = n > 0.0 ? std::abs(ledger.mu_hat(choice.first, choice.second) - 0.5) : 0.5;
        std::size_t m = 0;
        if (gap <= 0.0) {
            m = config_.batch.mode == BatchMode::adaptive ? config_.batch.m_max : config_.batch.fixed_m;
        } else {
            m = batch_size(config_.batch, static_cast<double>(t), gap);
        }
        DuelTicket ticket = make_ticket(state_.next_duel_id, state_.round, t, choice, ledger, m, n_inputs(), state_.rng);
        state_.t = t;
        ++state_.next_duel_id;
        state_.in_flight = ticket;
        return ticket;
    }

    /// Applies a judged duel to the ledger and advances the round when it is
    /// complete.
    void fold(const DuelTicket& ticket, const DuelOutcome& outcome)
    {
        if (!state_.in_flight || state_.in_flight->duel_id != ticket.duel_id) {
            throw NotFoundError("fold: duel " + std::to_string(ticket.duel_id) + " is not in flight");
        }
        detail::ensure(*state_.in_flight == ticket, "fold: ticket does not match the issued duel");
        detail::ensure(outcome.per_input.size() == ticket.batch.size(), "fold: outcome length differs from batch");
        const ArmIndex i = ticket.first;
        const ArmIndex j = ticket.second;

        if (state_.world) {
            state_.round_regret += copeland_regret(truth(), i, j);
        }
        for (std::size_t k = 0; k < ticket.batch.size(); ++k) {
            const auto& judged = outcome.per_input[k];
            DuelLogRow row;
            row.round = ticket.round;
            row.duel_id = ticket.duel_id;
            row.arm_i = ticket.first_id;
            row.arm_j = ticket.second_id;
            row.input = ticket.batch[k];
            row.source = judged.source;
            row.gamma = config_.gamma(judged.source);
            row.m = ticket.batch.size();
            row.epsilon_t = state_.stopping.epsilon_t;
            row.pac_met = state_.stopping.pac_met;
            if (judged.winner != Verdict::tie) {
                row.winner = judged.winner == Verdict::first ? ticket.first_id : ticket.second_id;
            }
            if (config_.fold == FoldMode::per_input) {
                apply(state_.ledger, i, j, judged.winner, row.gamma);
            }
            state_.history.push_back(std::move(row));
        }
        if (config_.fold == FoldMode::aggregate) {
            apply(state_.ledger, i, j, outcome.aggregate, 0.5);
        }
        state_.cost.judge_calls += ticket.batch.size();
        state_.warnings += outcome.warnings;
        state_.in_flight.reset();
        if (++state_.duel_in_round >= config_.duels_per_round) {
            end_round();
        }
    }

    /// Issues and judges one duel with the automatic judge.
    void step()
    {
        const DuelTicket ticket = next_ticket();
        auto judge = make_judge();
        const DuelOutcome outcome = judge.top->judge(ticket, state_.rng);
        fold(ticket, outcome);
    }

    void run_round()
    {
        const std::size_t r = state_.round;
        while (!state_.finished && state_.round == r) {
            step();
        }
    }

    /// Runs until every round up to and including `last_round` is complete.
    void run_until(std::size_t last_round)
    {
        while (!state_.finished && state_.round <= last_round) {
            step();
        }
    }

    RunResult run()
    {
        while (!state_.finished) {
            step();
        }
        return {final_best(), state_};
    }

    /// Runs a mutation event now. Requires no duel in flight.
    MutationResult mutate_now()
    {
        detail::ensure<std::logic_error>(!state_.in_flight, "mutate_now: a duel is in flight");
        detail::ensure(config_.mutation.enabled(), "mutate_now: mutation.mode is none");
        auto res = mutate(state_.round);
        refresh_stopping();
        return res;
    }

    std::string duel_log() const { return duel_log_csv(state_.history); }

    nlohmann::json snapshot() const;

    /// Response of a prompt on a live input, generated on first use.
    CandidateResponse response(const PromptId& id, std::size_t input)
    {
        const std::string key = id.value + '\x1f' + std::to_string(input);
        {
            std::lock_guard<std::mutex> lock(*cache_mutex_);
            const auto it = state_.responses.find(key);
            if (it != state_.responses.end()) {
                return it->second;
            }
        }
        const auto& rec = record(id);
        const LiveInput& in = inputs_.at(input);
        const std::string user = in.context.empty() ? in.query : in.context + "\n\n" + in.query;
        const std::string text = chat_complete(config_.live.generator, transport(), user, rec.text);
        CandidateResponse r = split_response(text, config_.live.answer_pattern);
        std::lock_guard<std::mutex> lock(*cache_mutex_);
        ++state_.cost.prediction_calls;
        state_.responses.emplace(key, r);
        return r;
    }

    const PromptRecord& record(const PromptId& id) const
    {
        for (const auto& r : state_.pool) {
            if (r.id == id) return r;
        }
        for (const auto& r : state_.archive) {
            if (r.id == id) return r;
        }
        throw NotFoundError("unknown arm " + id.value);
    }

    std::string templates_dir() const
    {
        return config_.live.templates_dir.empty() ? std::string(DUELOPT_ASSET_DIR) + "/templates"
                                                  : config_.live.templates_dir;
    }

    /// Text a human judge sees for `id` on `input`. Carries no arm identity.
    std::string payload(const PromptId& id, std::size_t input)
    {
        if (!config_.simulated()) {
            return response(id, input).reasoning;
        }
        return state_.world->arm_correct(id, input) ? "answer: correct" : "answer: incorrect";
    }

    InputText input_text(std::size_t input) const
    {
        if (config_.simulated()) {
            return {"input " + std::to_string(input), ""};
        }
        return {inputs_.at(input).query, inputs_.at(input).context};
    }

private:
    struct JudgeStack {
        std::unique_ptr<Judge> base;
        std::unique_ptr<LabelSet> labels;
        std::unique_ptr<Judge> wrapper;
        Judge* top = nullptr;
    };

    Engine(RunConfig config, EngineHooks hooks, RunState state)
        : config_(std::move(config)), hooks_(std::move(hooks)), state_(std::move(state)),
          cache_mutex_(std::make_unique<std::mutex>())
    {
        apply_api_key();
        if (!config_.simulated()) {
            inputs_ = load_input_file(config_.live.inputs_file);
        }
    }

    void apply_api_key()
    {
        if (!hooks_.api_key.empty()) {
            config_.judge.endpoint.api_key = hooks_.api_key;
            config_.live.generator.api_key = hooks_.api_key;
        }
    }

    static void apply(PreferenceLedger& ledger, ArmIndex i, ArmIndex j, Verdict v, double gamma)
    {
        if (v == Verdict::tie) {
            ledger.record_tie(i, j);
        } else if (v == Verdict::first) {
            ledger.record_duel(i, j, gamma);
        } else {
            ledger.record_duel(j, i, gamma);
        }
    }

    const Transport& transport() const
    {
        if (!hooks_.transport) {
            throw TransportError("no transport configured for remote calls");
        }
        return hooks_.transport;
    }

    void warn(const std::string& msg)
    {
        ++state_.warnings;
        if (hooks_.warn) {
            hooks_.warn(msg);
        }
    }

    void init_world()
    {
        const auto& w = config_.world;
        if (w.kind == WorldKind::latent) {
            LatentWorldSpec spec = w.latent;
            spec.seed = config_.world_seed();
            state_.world = build_world(spec);
        } else {
            std::vector<PromptId> ids;
            for (std::size_t i = 0; i < w.mu.size(); ++i) {
                ids.push_back(w.ids.empty() ? simulated_arm_id(i) : PromptId(w.ids[i]));
            }
            try {
                state_.world = WorldModel::explicit_matrix(ids, w.mu, w.utilities, config_.world_seed());
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("world.mu: ") + e.what());
            }
        }
        for (const auto& a : state_.world->arms()) {
            PromptRecord r;
            r.id = a.id;
            r.text = "simulated prompt " + a.id.value;
            if (!a.latent.empty()) {
                r.latent = a.latent;
            }
            r.serial = state_.next_serial++;
            state_.pool.push_back(std::move(r));
        }
    }

    void init_live()
    {
        state_.pool = load_prompt_file(config_.live.prompts_file);
        inputs_ = load_input_file(config_.live.inputs_file);
        state_.next_serial = state_.pool.size();
    }

    void precompute_predictions(const PromptId& id)
    {
        const std::size_t b = std::min(config_.live.cache_examples, inputs_.size());
        for (std::size_t x = 0; x < b; ++x) {
            (void)response(id, x);
        }
    }

    JudgeStack make_judge()
    {
        JudgeStack js;
        switch (config_.judge.kind) {
        case JudgeKind::simulated:
            js.base = std::make_unique<SimulatedJudge>(*state_.world, JudgeCalibration{config_.judge.accuracy});
            break;
        case JudgeKind::oracle:
            js.base = std::make_unique<OracleJudge>(*state_.world);
            break;
        case JudgeKind::remote: {
            RemoteJudgeOptions opts;
            opts.split_by_answer = config_.judge.split_by_answer;
            opts.parallel = config_.judge.parallel;
            js.base = std::make_unique<RemoteLlmJudge>(
                config_.judge.endpoint, JudgeTemplates::load(templates_dir()), transport(),
                [this](const PromptId& id, std::size_t x) { return response(id, x); },
                [this](std::size_t x) { return input_text(x); }, opts, hooks_.answers_equal);
            break;
        }
        case JudgeKind::human:
            throw std::logic_error("human judging is driven through the serve session");
        }
        js.top = js.base.get();
        if (config_.judge.label_fraction > 0.0) {
            if (config_.simulated()) {
                js.labels = std::make_unique<WorldLabelSet>(*state_.world);
            } else {
                js.labels = std::make_unique<FunctionLabelSet>([this](std::size_t x, const PromptId& id) {
                    const auto& label = inputs_.at(x).label;
                    if (!label) {
                        return std::optional<bool>();
                    }
                    const auto resp = response(id, x);
                    const bool eq = hooks_.answers_equal ? hooks_.answers_equal(resp.answer, *label)
                                                         : RemoteLlmJudge::normalize(resp.answer) ==
                                                               RemoteLlmJudge::normalize(*label);
                    return std::optional<bool>(eq);
                });
            }
            js.wrapper = std::make_unique<PartialLabelJudge>(*js.base, *js.labels, config_.judge.label_fraction,
                                                             n_inputs());
            js.top = js.wrapper.get();
        }
        return js;
    }

    std::unique_ptr<Mutator> make_mutator()
    {
        switch (config_.mutation.mode) {
        case MutationMode::latent:
            return std::make_unique<LatentMutator>(*state_.world, config_.mutation.eta);
        case MutationMode::scripted: {
            auto m = std::make_unique<ScriptedMutator>(config_.mutation_script);
            m->set_position(state_.mutator_position);
            return m;
        }
        case MutationMode::llm: {
            const std::string dir = templates_dir();
            const EndpointConfig& ep =
                config_.live.generator.url.empty() ? config_.judge.endpoint : config_.live.generator;
            return std::make_unique<LlmMutator>(ep, transport(), read_text_file(dir + "/mutation.txt"),
                                                load_tips(dir + "/mutation_tips.json"), config_.mutation_tips);
        }
        case MutationMode::none:
            break;
        }
        throw std::logic_error("mutation disabled");
    }

    MutationResult mutate(std::size_t round)
    {
        auto mutator = make_mutator();
        const std::size_t calls_before = mutator->calls();
        WorldModel* world = state_.world ? &*state_.world : nullptr;
        MutationResult res;
        try {
            res = mutation_step(state_.pool, state_.ledger, config_.mutation, *mutator, state_.rng, round,
                                state_.next_serial, world);
        } catch (...) {
            state_.cost.mutation_calls += mutator->calls() - calls_before;
            throw;
        }
        state_.cost.mutation_calls += mutator->calls() - calls_before;
        if (auto* scripted = dynamic_cast<ScriptedMutator*>(mutator.get())) {
            state_.mutator_position = scripted->position();
        }
        if (res.warning) {
            warn(*res.warning);
            return res;
        }
        for (auto& r : res.removed) {
            state_.archive.push_back(r);
        }
        if (config_.behavioral.prune_threshold > 0.0) {
            std::set<ArmIndex> protect;
            for (const auto& child : res.added) {
                protect.insert(*state_.ledger.index_of(child.id));
            }
            const auto redundant = redundancy_prune(state_.ledger, config_.behavioral.prune_threshold, protect);
            if (!redundant.empty()) {
                state_.ledger.remove(redundant);
                std::vector<PromptRecord> kept;
                for (ArmIndex a = 0; a < state_.pool.size(); ++a) {
                    if (redundant.count(a)) {
                        PromptRecord r = state_.pool[a];
                        r.status = PromptStatus::pruned;
                        r.pruned_round = round;
                        res.removed.push_back(r);
                        state_.archive.push_back(std::move(r));
                    } else {
                        kept.push_back(std::move(state_.pool[a]));
                    }
                }
                state_.pool = std::move(kept);
            }
        }
        MutationEvent ev;
        ev.after_duels = state_.t;
        ev.round = round;
        for (const auto& r : res.added) {
            ev.added.push_back(r.id);
        }
        for (const auto& r : res.removed) {
            ev.removed.push_back(r.id);
        }
        state_.events.push_back(std::move(ev));
        if (!config_.simulated()) {
            for (const auto& r : res.added) {
                precompute_predictions(r.id);
            }
        }
        return res;
    }

    void refresh_stopping()
    {
        state_.stopping = check_stopping(state_.ledger, config_.behavioral, config_.stopping,
                                         static_cast<double>(std::max<std::uint64_t>(1, state_.t)));
    }

    void end_round()
    {
        refresh_stopping();
        TraceRow row;
        row.round = state_.round;
        row.t = state_.t;
        row.epsilon_t = state_.round_start_epsilon;
        row.pool_size = state_.ledger.size();
        const ArmIndex best = state_.ledger.current_best();
        row.leader = state_.ledger.arm_ids()[best];
        if (state_.world) {
            state_.cumulative_regret += state_.round_regret;
            row.r_t = state_.round_regret;
            row.R_t = state_.cumulative_regret;
            row.borda_regret = borda_regret(truth(), best);
            row.leader_rank = leader_rank(*state_.world, state_.ledger.arm_ids(), row.leader);
        }
        state_.trace.push_back(std::move(row));
        state_.round_regret = 0.0;
        state_.duel_in_round = 0;

        if (state_.stopping.stop) {
            state_.finished = true;
            state_.stopped_early = true;
            return;
        }
        if (config_.mutation.due(state_.round, config_.rounds)) {
            mutate(state_.round);
            refresh_stopping();
        }
        ++state_.round;
        state_.round_start_epsilon = state_.stopping.epsilon_t;
        if (state_.round > config_.rounds) {
            state_.finished = true;
        }
    }

    const TrueScores& truth()
    {
        if (truth_ids_ != state_.ledger.arm_ids()) {
            truth_ids_ = state_.ledger.arm_ids();
            truth_ = true_scores(*state_.world, truth_ids_);
        }
        return truth_;
    }

    RunConfig config_;
    EngineHooks hooks_;
    RunState state_;
    std::vector<LiveInput> inputs_;
    std::unique_ptr<std::mutex> cache_mutex_;
    std::vector<PromptId> truth_ids_;
    TrueScores truth_;
};

// ---------------------------------------------------------------------------
// Snapshot encoding

namespace snapshot_detail {

using nlohmann::json;

inline json record_to_json(const PromptRecord& r)
{
    json j = {{"id", r.id.value},
              {"text", r.text},
              {"status", r.status == PromptStatus::active ? "active" : "pruned"},
              {"serial", r.serial},
              {"created_round", r.created_round}};
    j["latent"] = r.latent ? json(*r.latent) : json(nullptr);
    j["parent"] = r.parent ? json(r.parent->value) : json(nullptr);
    j["pruned_round"] = r.pruned_round ? json(*r.pruned_round) : json(nullptr);
    return j;
}

inline PromptRecord record_from_json(const json& j)
{
    PromptRecord r;
    r.id = PromptId(j.at("id").get<std::string>());
    r.text = j.at("text").get<std::string>();
    const auto status = j.at("status").get<std::string>();
    if (status != "active" && status != "pruned") {
        throw SnapshotError("bad prompt status '" + status + "'");
    }
    r.status = status == "active" ? PromptStatus::active : PromptStatus::pruned;
    r.serial = j.at("serial").get<std::uint64_t>();
    r.created_round = j.at("created_round").get<std::size_t>();
    if (!j.at("latent").is_null()) r.latent = j.at("latent").get<std::vector<double>>();
    if (!j.at("parent").is_null()) r.parent = PromptId(j.at("parent").get<std::string>());
    if (!j.at("pruned_round").is_null()) r.pruned_round = j.at("pruned_round").get<std::size_t>();
    return r;
}

inline json matrix_to_json(const SquareMatrix& m)
{
    json flat = json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) {
            flat.push_back(m(i, j));
        }
    }
    return flat;
}

inline SquareMatrix matrix_from_json(const json& j, std::size_t n)
{
    const auto flat = j.get<std::vector<double>>();
    if (flat.size() != n * n) {
        throw SnapshotError("ledger matrix has the wrong size");
    }
    SquareMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            m(i, k) = flat[i * n + k];
        }
    }
    return m;
}

inline json world_to_json(const WorldModel& w)
{
    const auto& s = w.spec();
    if (w.kind() == WorldKind::explicit_matrix) {
        json ids = json::array();
        json utilities = nullptr;
        if (w.has_utilities()) {
            utilities = json::array();
        }
        for (const auto& a : w.arms()) {
            ids.push_back(a.id.value);
            if (w.has_utilities()) {
                utilities.push_back(a.utility);
            }
        }
        return {{"kind", "explicit"}, {"ids", ids}, {"mu", w.matrix()}, {"utilities", utilities}, {"seed", s.seed}};
    }
    json arms = json::array();
    for (const auto& a : w.arms()) {
        arms.push_back({{"id", a.id.value}, {"latent", a.latent}});
    }
    return {{"kind", "latent"},
            {"spec",
             {{"k", s.k},
              {"latent_dim", s.latent_dim},
              {"tau", s.tau},
              {"lambda", s.lambda},
              {"u_max", s.u_max},
              {"radius", s.radius},
              {"min_gap", s.min_gap},
              {"exclusion", s.exclusion},
              {"include_optimum", s.include_optimum},
              {"seed", s.seed}}},
            {"arms", arms},
            {"optimum", w.optimum()},
            {"optimum_arm", w.optimum_arm() ? json(w.optimum_arm()->value) : json(nullptr)}};
}

inline WorldModel world_from_json(const json& j)
{
    if (j.at("kind") == "explicit") {
        std::vector<PromptId> ids;
        for (const auto& s : j.at("ids")) {
            ids.push_back(PromptId(s.get<std::string>()));
        }
        std::optional<std::vector<double>> utilities;
        if (!j.at("utilities").is_null()) {
            utilities = j.at("utilities").get<std::vector<double>>();
        }
        return WorldModel::explicit_matrix(ids, j.at("mu").get<std::vector<std::vector<double>>>(), utilities,
                                           j.at("seed").get<std::uint64_t>());
    }
    const auto& sj = j.at("spec");
    LatentWorldSpec s;
    s.k = sj.at("k").get<std::size_t>();
    s.latent_dim = sj.at("latent_dim").get<std::size_t>();
    s.tau = sj.at("tau").get<double>();
    s.lambda = sj.at("lambda").get<double>();
    s.u_max = sj.at("u_max").get<double>();
    s.radius = sj.at("radius").get<double>();
    s.min_gap = sj.at("min_gap").get<double>();
    s.exclusion = sj.at("exclusion").get<double>();
    s.include_optimum = sj.at("include_optimum").get<bool>();
    s.seed = sj.at("seed").get<std::uint64_t>();
    std::vector<WorldArm> arms;
    for (const auto& a : j.at("arms")) {
        arms.push_back({PromptId(a.at("id").get<std::string>()), a.at("latent").get<std::vector<double>>(), 0.0});
    }
    std::optional<PromptId> opt;
    if (!j.at("optimum_arm").is_null()) {
        opt = PromptId(j.at("optimum_arm").get<std::string>());
    }
    return WorldModel::latent(s, std::move(arms), j.at("optimum").get<std::vector<double>>(), opt);
}

inline json ticket_to_json(const DuelTicket& t)
{
    return {{"duel_id", t.duel_id},   {"round", t.round},       {"t", t.t},
            {"first", t.first},       {"second", t.second},     {"first_id", t.first_id.value},
            {"second_id", t.second_id.value}, {"batch", t.batch}, {"swapped", t.swapped}};
}

inline DuelTicket ticket_from_json(const json& j)
{
    DuelTicket t;
    t.duel_id = j.at("duel_id").get<std::uint64_t>();
    t.round = j.at("round").get<std::size_t>();
    t.t = j.at("t").get<std::uint64_t>();
    t.first = j.at("first").get<std::size_t>();
    t.second = j.at("second").get<std::size_t>();
    t.first_id = PromptId(j.at("first_id").get<std::string>());
    t.second_id = PromptId(j.at("second_id").get<std::string>());
    t.batch = j.at("batch").get<std::vector<std::size_t>>();
    t.swapped = j.at("swapped").get<std::vector<bool>>();
    return t;
}

inline json optional_number(const std::optional<double>& v) { return v ? json_number(*v) : json(nullptr); }

inline std::optional<double> optional_number_from(const json& j)
{
    if (j.is_null()) {
        return std::nullopt;
    }
    return number_from_json(j);
}

inline json stopping_to_json(const StoppingStatus& s)
{
    json blocking = json::array();
    for (const auto& b : s.blocking_opponents) {
        blocking.push_back({{"arm", b.arm.value}, {"lower", optional_number(b.lower)}});
    }
    return {{"cover_met", s.cover_met},
            {"pac_met", s.pac_met},
            {"epsilon_t", json_number(s.epsilon_t)},
            {"leader", s.leader ? json(s.leader->value) : json(nullptr)},
            {"blocking_opponents", blocking},
            {"stop", s.stop}};
}

inline StoppingStatus stopping_from_json(const json& j)
{
    StoppingStatus s;
    s.cover_met = j.at("cover_met").get<bool>();
    s.pac_met = j.at("pac_met").get<bool>();
    s.epsilon_t = number_from_json(j.at("epsilon_t"));
    if (!j.at("leader").is_null()) {
        s.leader = PromptId(j.at("leader").get<std::string>());
    }
    for (const auto& b : j.at("blocking_opponents")) {
        s.blocking_opponents.push_back({PromptId(b.at("arm").get<std::string>()), optional_number_from(b.at("lower"))});
    }
    s.stop = j.at("stop").get<bool>();
    return s;
}

inline json trace_to_json(const TraceRow& r)
{
    return {{"round", r.round},
            {"t", r.t},
            {"r_t", optional_number(r.r_t)},
            {"R_t", optional_number(r.R_t)},
            {"borda_regret", optional_number(r.borda_regret)},
            {"leader_rank", r.leader_rank ? json(*r.leader_rank) : json(nullptr)},
            {"epsilon_t", json_number(r.epsilon_t)},
            {"leader", r.leader.value},
            {"pool_size", r.pool_size}};
}

inline TraceRow trace_from_json(const json& j)
{
    TraceRow r;
    r.round = j.at("round").get<std::size_t>();
    r.t = j.at("t").get<std::uint64_t>();
    r.r_t = optional_number_from(j.at("r_t"));
    r.R_t = optional_number_from(j.at("R_t"));
    r.borda_regret = optional_number_from(j.at("borda_regret"));
    if (!j.at("leader_rank").is_null()) {
        r.leader_rank = j.at("leader_rank").get<std::size_t>();
    }
    r.epsilon_t = number_from_json(j.at("epsilon_t"));
    r.leader = PromptId(j.at("leader").get<std::string>());
    r.pool_size = j.at("pool_size").get<std::size_t>();
    return r;
}

} // namespace snapshot_detail

inline nlohmann::json Engine::snapshot() const
{
    using namespace snapshot_detail;
    const auto& s = state_;
    json pool = json::array();
    for (const auto& r : s.pool) pool.push_back(record_to_json(r));
    json archive = json::array();
    for (const auto& r : s.archive) archive.push_back(record_to_json(r));
    json ids = json::array();
    for (const auto& id : s.ledger.arm_ids()) ids.push_back(id.value);
    json trace = json::array();
    for (const auto& r : s.trace) trace.push_back(trace_to_json(r));
    json events = json::array();
    for (const auto& e : s.events) {
        json added = json::array();
        json removed = json::array();
        for (const auto& id : e.added) added.push_back(id.value);
        for (const auto& id : e.removed) removed.push_back(id.value);
        events.push_back({{"after_duels", e.after_duels}, {"round", e.round}, {"added", added}, {"removed", removed}});
    }
    json responses = json::object();
    for (const auto& [k, r] : s.responses) {
        responses[k] = {{"answer", r.answer}, {"reasoning", r.reasoning}};
    }
    json st = {{"round", s.round},
               {"t", s.t},
               {"duel_in_round", s.duel_in_round},
               {"next_duel_id", s.next_duel_id},
               {"next_serial", s.next_serial},
               {"pool", pool},
               {"archive", archive},
               {"ledger",
                {{"arm_ids", ids}, {"wins", matrix_to_json(s.ledger.wins())}, {"counts", matrix_to_json(s.ledger.counts())}}},
               {"cost",
                {{"judge_calls", s.cost.judge_calls},
                 {"prediction_calls", s.cost.prediction_calls},
                 {"mutation_calls", s.cost.mutation_calls}}},
               {"stopping", stopping_to_json(s.stopping)},
               {"rng", s.rng.state()},
               {"world", s.world ? world_to_json(*s.world) : json(nullptr)},
               {"duel_log", duel_log_csv(s.history)},
               {"trace", trace},
               {"events", events},
               {"round_regret", json_number(s.round_regret)},
               {"cumulative_regret", json_number(s.cumulative_regret)},
               {"round_start_epsilon", json_number(s.round_start_epsilon)},
               {"warnings", s.warnings},
               {"mutator_position", s.mutator_position},
               {"finished", s.finished},
               {"stopped_early", s.stopped_early},
               {"in_flight", s.in_flight ? ticket_to_json(*s.in_flight) : json(nullptr)},
               {"responses", responses}};
    return {{"schema_version", kSnapshotSchemaVersion}, {"config", to_json(config_)}, {"state", st}};
}

inline Engine Engine::restore(const nlohmann::json& snap, EngineHooks hooks)
{
    using namespace snapshot_detail;
    if (!snap.is_object() || !snap.contains("schema_version")) {
        throw SnapshotError("snapshot: missing schema_version");
    }
    if (snap["schema_version"] != kSnapshotSchemaVersion) {
        throw SnapshotError("snapshot: schema_version " + snap["schema_version"].dump() + " is not supported (expected " +
                            std::to_string(kSnapshotSchemaVersion) + ")");
    }
    RunConfig config;
    RunState s;
    try {
        config = parse_config(snap.at("config"));
        const auto& j = snap.at("state");
        s.round = j.at("round").get<std::size_t>();
        s.t = j.at("t").get<std::uint64_t>();
        s.duel_in_round = j.at("duel_in_round").get<std::size_t>();
        s.next_duel_id = j.at("next_duel_id").get<std::uint64_t>();
        s.next_serial = j.at("next_serial").get<std::uint64_t>();
        for (const auto& r : j.at("pool")) s.pool.push_back(record_from_json(r));
        for (const auto& r : j.at("archive")) s.archive.push_back(record_from_json(r));
        std::vector<PromptId> ids;
        for (const auto& id : j.at("ledger").at("arm_ids")) ids.push_back(PromptId(id.get<std::string>()));
        const std::size_t n = ids.size();
        s.ledger = PreferenceLedger(ids, matrix_from_json(j.at("ledger").at("wins"), n),
                                    matrix_from_json(j.at("ledger").at("counts"), n));
        if (s.pool.size() != n) {
            throw SnapshotError("snapshot: pool and ledger sizes differ");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (s.pool[i].id != ids[i]) {
                throw SnapshotError("snapshot: pool order does not match ledger");
            }
        }
        const auto& c = j.at("cost");
        s.cost.judge_calls = c.at("judge_calls").get<std::uint64_t>();
        s.cost.prediction_calls = c.at("prediction_calls").get<std::uint64_t>();
        s.cost.mutation_calls = c.at("mutation_calls").get<std::uint64_t>();
        s.stopping = stopping_from_json(j.at("stopping"));
        s.rng.set_state(j.at("rng").get<std::string>());
        if (!j.at("world").is_null()) {
            s.world = world_from_json(j.at("world"));
        }
        s.history = parse_duel_log_csv(j.at("duel_log").get<std::string>());
        for (const auto& r : j.at("trace")) s.trace.push_back(trace_from_json(r));
        for (const auto& e : j.at("events")) {
            MutationEvent ev;
            ev.after_duels = e.at("after_duels").get<std::uint64_t>();
            ev.round = e.at("round").get<std::size_t>();
            for (const auto& id : e.at("added")) ev.added.push_back(PromptId(id.get<std::string>()));
            for (const auto& id : e.at("removed")) ev.removed.push_back(PromptId(id.get<std::string>()));
            s.events.push_back(std::move(ev));
        }
        s.round_regret = number_from_json(j.at("round_regret"));
        s.cumulative_regret = number_from_json(j.at("cumulative_regret"));
        s.round_start_epsilon = number_from_json(j.at("round_start_epsilon"));
        s.warnings = j.at("warnings").get<std::size_t>();
        s.mutator_position = j.at("mutator_position").get<std::size_t>();
        s.finished = j.at("finished").get<bool>();
        s.stopped_early = j.at("stopped_early").get<bool>();
        if (!j.at("in_flight").is_null()) {
            s.in_flight = ticket_from_json(j.at("in_flight"));
        }
        for (const auto& [k, v] : j.at("responses").items()) {
            s.responses[k] = {v.at("answer").get<std::string>(), v.at("reasoning").get<std::string>()};
        }
    } catch (const SnapshotError&) {
        throw;
    } catch (const std::exception& e) {
        throw SnapshotError(std::string("snapshot: malformed document: ") + e.what());
    }
    return Engine(std::move(config), std::move(hooks), std::move(s));
}

inline Engine Engine::restore(const std::string& text, EngineHooks hooks)
{
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw SnapshotError("snapshot: not valid JSON");
    }
    return restore(j, std::move(hooks));
}

} // namespace duelopt
