#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "duelopt/config.hpp"
#include "duelopt/engine.hpp"
#include "duelopt/evaluation.hpp"

namespace duelopt {

/// Recomputes the per-round trace of a finished or interrupted run from its
/// duel log, the final world and the recorded pool events.
inline std::vector<TraceRow> replay_trace(const RunConfig& config, const std::optional<WorldModel>& world,
                                          const std::vector<PromptRecord>& records,
                                          const std::vector<MutationEvent>& events,
                                          const std::vector<DuelLogRow>& rows)
{
    std::set<PromptId> added_later;
    for (const auto& e : events) {
        added_later.insert(e.added.begin(), e.added.end());
    }
    std::vector<PromptRecord> initial;
    for (const auto& r : records) {
        if (!added_later.count(r.id)) {
            initial.push_back(r);
        }
    }
    std::sort(initial.begin(), initial.end(), [](const auto& a, const auto& b) { return a.serial < b.serial; });
    std::vector<PromptId> ids;
    for (const auto& r : initial) {
        ids.push_back(r.id);
    }
    PreferenceLedger ledger(ids);

    std::size_t next_event = 0;
    std::uint64_t duels_done = 0;
    auto apply_events = [&] {
        while (next_event < events.size() && events[next_event].after_duels <= duels_done) {
            const auto& e = events[next_event++];
            for (const auto& id : e.added) {
                ledger.expand(id);
            }
            std::set<ArmIndex> gone;
            for (const auto& id : e.removed) {
                const auto idx = ledger.index_of(id);
                if (!idx) {
                    throw ParseError("replay: event removes unknown arm " + id.value);
                }
                gone.insert(*idx);
            }
            if (!gone.empty()) {
                ledger.remove(gone);
            }
        }
    };
    auto epsilon_now = [&] {
        return check_stopping(ledger, config.behavioral, config.stopping,
                              static_cast<double>(std::max<std::uint64_t>(1, duels_done)))
            .epsilon_t;
    };
    auto index = [&](const PromptId& id) {
        const auto idx = ledger.index_of(id);
        if (!idx) {
            throw ParseError("replay: duel log names unknown arm " + id.value);
        }
        return *idx;
    };
    auto fold = [&](ArmIndex i, ArmIndex j, const std::optional<PromptId>& winner, const PromptId& first,
                    double gamma) {
        if (!winner) {
            ledger.record_tie(i, j);
        } else if (*winner == first) {
            ledger.record_duel(i, j, gamma);
        } else {
            ledger.record_duel(j, i, gamma);
        }
    };

    std::vector<TraceRow> trace;
    double cumulative = 0.0;
    std::size_t pos = 0;
    apply_events();
    while (pos < rows.size()) {
        const std::size_t round = rows[pos].round;
        TraceRow row;
        row.round = round;
        row.epsilon_t = epsilon_now();
        double regret = 0.0;
        while (pos < rows.size() && rows[pos].round == round) {
            apply_events();
            const std::uint64_t duel = rows[pos].duel_id;
            const ArmIndex i = index(rows[pos].arm_i);
            const ArmIndex j = index(rows[pos].arm_j);
            if (world) {
                regret += copeland_regret(true_scores(*world, ledger.arm_ids()), i, j);
            }
            int net = 0;
            while (pos < rows.size() && rows[pos].duel_id == duel) {
                const auto& r = rows[pos];
                if (config.fold == FoldMode::per_input) {
                    fold(i, j, r.winner, r.arm_i, r.gamma);
                } else if (r.winner) {
                    net += *r.winner == r.arm_i ? 1 : -1;
                }
                ++pos;
            }
            if (config.fold == FoldMode::aggregate) {
                std::optional<PromptId> w;
                if (net != 0) {
                    w = net > 0 ? ledger.arm_ids()[i] : ledger.arm_ids()[j];
                }
                fold(i, j, w, ledger.arm_ids()[i], 0.5);
            }
            ++duels_done;
        }
        row.t = duels_done;
        row.pool_size = ledger.size();
        const ArmIndex best = ledger.current_best();
        row.leader = ledger.arm_ids()[best];
        if (world) {
            cumulative += regret;
            row.r_t = regret;
            row.R_t = cumulative;
            row.borda_regret = borda_regret(true_scores(*world, ledger.arm_ids()), best);
            row.leader_rank = leader_rank(*world, ledger.arm_ids(), row.leader);
        }
        trace.push_back(std::move(row));
        apply_events();
    }
    return trace;
}

/// Replays from a snapshot document plus its duel log text.
inline std::vector<TraceRow> replay_trace(const nlohmann::json& snap, const std::string& duel_log)
{
    try {
        const RunConfig config = parse_config(snap.at("config"));
        const auto& st = snap.at("state");
        std::optional<WorldModel> world;
        if (!st.at("world").is_null()) {
            world = snapshot_detail::world_from_json(st.at("world"));
        }
        std::vector<PromptRecord> records;
        for (const auto& r : st.at("pool")) records.push_back(snapshot_detail::record_from_json(r));
        for (const auto& r : st.at("archive")) records.push_back(snapshot_detail::record_from_json(r));
        std::vector<MutationEvent> events;
        for (const auto& e : st.at("events")) {
            MutationEvent ev;
            ev.after_duels = e.at("after_duels").get<std::uint64_t>();
            ev.round = e.at("round").get<std::size_t>();
            for (const auto& id : e.at("added")) ev.added.push_back(PromptId(id.get<std::string>()));
            for (const auto& id : e.at("removed")) ev.removed.push_back(PromptId(id.get<std::string>()));
            events.push_back(std::move(ev));
        }
        return replay_trace(config, world, records, events, parse_duel_log_csv(duel_log));
    } catch (const nlohmann::json::exception& e) {
        throw SnapshotError(std::string("report: malformed snapshot: ") + e.what());
    }
}

/// One line of the evaluation report.
struct ReportRow {
    std::string sampler;
    std::uint64_t seed = 0;
    std::size_t t = 0;
    std::optional<double> r_t;
    std::optional<double> R_t;
    std::optional<std::size_t> leader_rank;
    double epsilon_t = 0.0;
};

inline std::vector<ReportRow> report_rows(const std::string& sampler, std::uint64_t seed,
                                          const std::vector<TraceRow>& trace)
{
    std::vector<ReportRow> out;
    for (const auto& r : trace) {
        out.push_back({sampler, seed, r.round, r.r_t, r.R_t, r.leader_rank, r.epsilon_t});
    }
    return out;
}

inline std::string report_csv(const std::vector<ReportRow>& rows)
{
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::string out = "sampler,seed,t,r_t,R_t,leader_rank,epsilon_t\n";
    for (const auto& r : rows) {
        out += r.sampler + ',' + std::to_string(r.seed) + ',' + std::to_string(r.t) + ',' + opt(r.r_t) + ',' +
               opt(r.R_t) + ',' + (r.leader_rank ? std::to_string(*r.leader_rank) : std::string()) + ',' +
               format_double(r.epsilon_t) + '\n';
    }
    return out;
}

inline nlohmann::json report_rows_json(const std::vector<ReportRow>& rows)
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{"sampler", r.sampler},
                       {"seed", r.seed},
                       {"t", r.t},
                       {"r_t", r.r_t ? json_number(*r.r_t) : nlohmann::json(nullptr)},
                       {"R_t", r.R_t ? json_number(*r.R_t) : nlohmann::json(nullptr)},
                       {"leader_rank", r.leader_rank ? nlohmann::json(*r.leader_rank) : nlohmann::json(nullptr)},
                       {"epsilon_t", json_number(r.epsilon_t)}});
    }
    return out;
}

/// Report of a single run, as written next to its duel log.
inline nlohmann::json run_report_json(const RunConfig& config, const std::vector<ReportRow>& rows)
{
    return {{"configs", {{std::string(to_string(config.sampler.kind)), to_json(config)}}},
            {"rows", report_rows_json(rows)}};
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

/// Sample mean and standard deviation; the deviation of one value is 0.
inline MeanStd mean_std(const std::vector<double>& v)
{
    MeanStd m;
    if (v.empty()) {
        return m;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    m.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    if (!std::isfinite(m.mean)) {
        m.std = 0.0;
    }
    return m;
}

struct SummaryRow {
    std::string sampler;
    std::size_t t = 0;
    MeanStd r_t;
    MeanStd R_t;
    MeanStd leader_rank;
    MeanStd epsilon_t;
    std::size_t n = 0;
};

struct CompareReport {
    std::vector<ReportRow> rows;
    std::vector<SummaryRow> summary;
    std::map<std::string, nlohmann::json> configs;
};

/// Config of seed index `i` in a comparison: seeds are base.seed + i.
inline RunConfig seeded_config(RunConfig c, SamplerKind kind, std::uint64_t seed)
{
    c.sampler.kind = kind;
    c.seed = seed;
    c.sampler.seed = seed;
    c.world.latent.seed = c.world_seed();
    return c;
}

/// Per-round mean and standard deviation over seeds for each sampler.
inline std::vector<SummaryRow> summarize(const std::vector<ReportRow>& rows, const std::vector<std::string>& samplers)
{
    std::vector<SummaryRow> out;
    for (const auto& s : samplers) {
        std::map<std::size_t, std::vector<const ReportRow*>> by_t;
        for (const auto& r : rows) {
            if (r.sampler == s) {
                by_t[r.t].push_back(&r);
            }
        }
        for (const auto& [t, group] : by_t) {
            std::vector<double> rt, big, rank, eps;
            for (const auto* r : group) {
                if (r->r_t) rt.push_back(*r->r_t);
                if (r->R_t) big.push_back(*r->R_t);
                if (r->leader_rank) rank.push_back(static_cast<double>(*r->leader_rank));
                eps.push_back(r->epsilon_t);
            }
            out.push_back({s, t, mean_std(rt), mean_std(big), mean_std(rank), mean_std(eps), group.size()});
        }
    }
    return out;
}

/// Runs every sampler on seeds base.seed .. base.seed + n_seeds - 1. Seeds
/// may run in parallel; results are keyed by (sampler, seed) so the report
/// does not depend on completion order.
inline CompareReport compare_samplers(const RunConfig& base, const std::vector<SamplerKind>& samplers,
                                      std::size_t n_seeds, std::size_t workers = 0)
{
    detail::ensure(n_seeds >= 1, "compare_samplers: n_seeds must be >= 1");
    detail::ensure(!samplers.empty(), "compare_samplers: no samplers");
    if (workers == 0) {
        workers = std::max(1u, std::thread::hardware_concurrency());
    }
    struct Job {
        std::size_t slot;
        SamplerKind kind;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < samplers.size(); ++s) {
        for (std::size_t i = 0; i < n_seeds; ++i) {
            jobs.push_back({s, samplers[s], base.seed + i});
        }
    }
    std::vector<std::vector<TraceRow>> traces(jobs.size());
    for (std::size_t start = 0; start < jobs.size(); start += workers) {
        std::vector<std::future<std::vector<TraceRow>>> batch;
        const std::size_t end = std::min(jobs.size(), start + workers);
        for (std::size_t k = start; k < end; ++k) {
            const Job job = jobs[k];
            batch.push_back(std::async(std::launch::async, [&base, job] {
                Engine engine(seeded_config(base, job.kind, job.seed));
                engine.run();
                return engine.state().trace;
            }));
        }
        for (std::size_t k = start; k < end; ++k) {
            traces[k] = batch[k - start].get();
        }
    }
    CompareReport report;
    std::vector<std::string> names;
    for (std::size_t s = 0; s < samplers.size(); ++s) {
        // The same sampler may appear twice; later slots get a suffix.
        std::string name(to_string(samplers[s]));
        while (std::find(names.begin(), names.end(), name) != names.end()) {
            name += "'";
        }
        names.push_back(name);
        report.configs[name] = to_json(seeded_config(base, samplers[s], base.seed));
    }
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        auto rows = report_rows(names[jobs[k].slot], jobs[k].seed, traces[k]);
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
    report.summary = summarize(report.rows, names);
    return report;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows)
{
    std::string out = "sampler,t,n,r_t_mean,r_t_std,R_t_mean,R_t_std,leader_rank_mean,leader_rank_std,epsilon_t_mean,"
                      "epsilon_t_std\n";
    for (const auto& r : rows) {
        out += r.sampler + ',' + std::to_string(r.t) + ',' + std::to_string(r.n) + ',' + format_double(r.r_t.mean) +
               ',' + format_double(r.r_t.std) + ',' + format_double(r.R_t.mean) + ',' + format_double(r.R_t.std) +
               ',' + format_double(r.leader_rank.mean) + ',' + format_double(r.leader_rank.std) + ',' +
               format_double(r.epsilon_t.mean) + ',' + format_double(r.epsilon_t.std) + '\n';
    }
    return out;
}

inline nlohmann::json compare_json(const CompareReport& report)
{
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& r : report.summary) {
        auto ms = [](const MeanStd& m) { return nlohmann::json{{"mean", json_number(m.mean)}, {"std", json_number(m.std)}}; };
        summary.push_back({{"sampler", r.sampler},
                           {"t", r.t},
                           {"n", r.n},
                           {"r_t", ms(r.r_t)},
                           {"R_t", ms(r.R_t)},
                           {"leader_rank", ms(r.leader_rank)},
                           {"epsilon_t", ms(r.epsilon_t)}});
    }
    nlohmann::json configs = nlohmann::json::object();
    for (const auto& [k, v] : report.configs) {
        configs[k] = v;
    }
    return {{"configs", configs}, {"rows", report_rows_json(report.rows)}, {"summary", summary}};
}

} // namespace duelopt
