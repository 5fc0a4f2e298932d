#pragma once

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "duelopt/config.hpp"
#include "duelopt/engine.hpp"
#include "duelopt/http.hpp"
#include "duelopt/report.hpp"
#include "duelopt/serve.hpp"

namespace duelopt::cli {

enum ExitCode : int { ok = 0, config_error = 1, runtime_error = 2 };

struct Options {
    std::string verb;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> rounds;
    std::string out = "out";
    std::string from;
    std::vector<std::string> set;
    std::string resume;
    std::optional<std::size_t> snapshot_at;
    bool quiet = false;
};

inline void write_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

inline std::string read_stream(std::istream& in)
{
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Overrides in the order they apply: --set values, then --seed/--rounds.
inline std::vector<std::string> overrides(const Options& o)
{
    std::vector<std::string> out = o.set;
    if (o.seed) out.push_back("seed=" + std::to_string(*o.seed));
    if (o.rounds) out.push_back("rounds=" + std::to_string(*o.rounds));
    return out;
}

inline RunConfig load(const Options& o, std::istream& in)
{
    nlohmann::json doc;
    std::string base = ".";
    if (o.config.empty() || o.config == "-") {
        if (o.verb != "validate-config") {
            throw ConfigError("--config is required");
        }
        doc = nlohmann::json::parse(read_stream(in), nullptr, false);
        if (doc.is_discarded()) {
            throw ConfigError("config: stdin is not valid JSON");
        }
    } else {
        doc = read_config_document(o.config);
        base = parent_dir(o.config);
    }
    for (const auto& s : overrides(o)) {
        apply_override(doc, s);
    }
    RunConfig c = parse_config(doc, base);
    c.validate();
    return c;
}

inline EngineHooks live_hooks(bool quiet, std::ostream& err)
{
    EngineHooks h;
    h.transport = httplib_transport();
    if (const char* key = std::getenv("LLM_API_KEY")) {
        h.api_key = key;
    }
    h.warn = [quiet, &err](const std::string& msg) {
        if (!quiet) err << "warning: " << msg << '\n';
    };
    return h;
}

/// Writes duel_log.csv, snapshot.json, report.csv and report.json.
inline void export_run(const Engine& engine, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_file(dir / "duel_log.csv", engine.duel_log());
    write_file(dir / "snapshot.json", engine.snapshot().dump(2) + "\n");
    const auto rows = report_rows(std::string(to_string(engine.config().sampler.kind)), engine.config().seed,
                                  engine.state().trace);
    write_file(dir / "report.csv", report_csv(rows));
    write_file(dir / "report.json", run_report_json(engine.config(), rows).dump(2) + "\n");
}

inline int run_engine(const Options& o, std::istream& in, std::ostream& out, std::ostream& err)
{
    std::optional<Engine> engine;
    const EngineHooks hooks = live_hooks(o.quiet, err);
    try {
        if (!o.resume.empty()) {
            std::ifstream f(o.resume);
            if (!f) {
                throw ConfigError("--resume: cannot open " + o.resume);
            }
            engine.emplace(Engine::restore(read_stream(f), hooks));
        } else {
            RunConfig c = load(o, in);
            if (o.verb == "simulate" && !c.simulated()) {
                throw ConfigError("simulate: config describes a live run; use optimize");
            }
            if (o.verb == "optimize" && c.simulated()) {
                throw ConfigError("optimize: live.prompts_file and a remote judge are required; use simulate");
            }
            engine.emplace(std::move(c), hooks);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const SnapshotError& e) {
        err << "error: " << e.what() << '\n';
        return runtime_error;
    }

    try {
        std::size_t last = engine->config().rounds;
        if (o.snapshot_at) {
            last = std::min(last, *o.snapshot_at);
        }
        while (!engine->finished() && engine->state().round <= last) {
            const std::size_t r = engine->state().round;
            engine->run_round();
            if (!o.quiet && !engine->state().trace.empty() && engine->state().trace.back().round == r) {
                const auto& row = engine->state().trace.back();
                out << "round " << r << " leader " << row.leader.value << " K=" << row.pool_size;
                if (row.leader_rank) out << " rank " << *row.leader_rank;
                out << " eps " << format_double(row.epsilon_t) << '\n';
            }
        }
    } catch (const TransportError& e) {
        export_run(*engine, o.out);
        err << "error: " << e.what() << "; snapshot written to " << (std::filesystem::path(o.out) / "snapshot.json")
            << '\n';
        return runtime_error;
    } catch (const AuthError& e) {
        export_run(*engine, o.out);
        err << "error: " << e.what() << '\n';
        return runtime_error;
    }
    export_run(*engine, o.out);
    if (!o.quiet) {
        const auto& s = engine->state();
        out << "final_best " << engine->final_best().id.value << " after " << s.t << " duels"
            << (s.stopped_early ? " (stopped early)" : "") << "; judge_calls " << s.cost.judge_calls
            << " prediction_calls " << s.cost.prediction_calls << " mutation_calls " << s.cost.mutation_calls << '\n';
    }
    return ok;
}

inline int run_compare(const Options& o, std::istream& in, std::ostream& out)
{
    const RunConfig c = load(o, in);
    if (!c.simulated()) {
        throw ConfigError("compare: only simulated configs can be compared");
    }
    const auto rep = compare_samplers(c, c.compare.samplers, c.compare.n_seeds);
    const std::filesystem::path dir(o.out);
    std::filesystem::create_directories(dir);
    write_file(dir / "compare.csv", report_csv(rep.rows));
    write_file(dir / "compare_summary.csv", summary_csv(rep.summary));
    write_file(dir / "compare.json", compare_json(rep).dump(2) + "\n");
    if (!o.quiet) {
        std::size_t last = 0;
        for (const auto& r : rep.summary) last = std::max(last, r.t);
        for (const auto& r : rep.summary) {
            if (r.t == last) {
                out << r.sampler << " round " << r.t << " leader_rank " << format_double(r.leader_rank.mean) << " +- "
                    << format_double(r.leader_rank.std) << " R_t " << format_double(r.R_t.mean) << '\n';
            }
        }
    }
    return ok;
}

inline int run_report(const Options& o)
{
    const std::filesystem::path src(o.from.empty() ? o.out : o.from);
    std::ifstream snap_in(src / "snapshot.json");
    std::ifstream log_in(src / "duel_log.csv");
    if (!snap_in || !log_in) {
        throw ConfigError("report: " + src.string() + " must hold snapshot.json and duel_log.csv");
    }
    const auto snap = nlohmann::json::parse(read_stream(snap_in), nullptr, false);
    if (snap.is_discarded()) {
        throw SnapshotError("report: snapshot.json is not valid JSON");
    }
    const auto trace = replay_trace(snap, read_stream(log_in));
    const RunConfig c = parse_config(snap.at("config"));
    const auto rows = report_rows(std::string(to_string(c.sampler.kind)), c.seed, trace);
    const std::filesystem::path dir(o.out);
    std::filesystem::create_directories(dir);
    write_file(dir / "report.csv", report_csv(rows));
    write_file(dir / "report.json", run_report_json(c, rows).dump(2) + "\n");
    return ok;
}

inline std::atomic<httplib::Server*>& active_server()
{
    static std::atomic<httplib::Server*> server{nullptr};
    return server;
}

inline int run_serve(const Options& o, std::istream& in, std::ostream& out, std::ostream& err)
{
    const EngineHooks hooks = live_hooks(o.quiet, err);
    std::optional<Engine> engine;
    if (!o.resume.empty()) {
        std::ifstream f(o.resume);
        if (!f) {
            throw ConfigError("--resume: cannot open " + o.resume);
        }
        engine.emplace(Engine::restore(read_stream(f), hooks));
    } else {
        engine.emplace(load(o, in), hooks);
    }
    const ServeSpec spec = engine->config().serve;
    Session session(std::move(*engine), session_mode_from_string(spec.mode));
    httplib::Server server;
    mount_api(server, session, spec);
    if (!server.bind_to_port(spec.host, spec.port)) {
        err << "error: cannot listen on " << spec.host << ':' << spec.port << '\n';
        return runtime_error;
    }
    active_server() = &server;
    std::signal(SIGINT, [](int) {
        if (auto* s = active_server().load()) s->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (auto* s = active_server().load()) s->stop();
    });
    session.start();
    if (!o.quiet) {
        out << "serving on http://" << spec.host << ':' << spec.port << " (" << spec.mode << ")" << std::endl;
    }
    server.listen_after_bind();
    active_server() = nullptr;
    session.stop();
    session.with_engine([&](const Engine& e) {
        export_run(e, o.out);
        return 0;
    });
    return ok;
}

/// Entry point shared by the duelopt binary and the tests.
inline int dispatch(int argc, const char* const* argv, std::istream& in = std::cin, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr)
{
    CLI::App app{"Dueling-bandit prompt optimizer"};
    app.require_subcommand(1);
    Options o;
    auto common = [&o](CLI::App* sub, bool run_flags) {
        sub->add_option("--config", o.config, "JSON config file");
        sub->add_option("--set", o.set, "Override KEY=VALUE (repeatable)")->take_all();
        sub->add_option("--seed", o.seed, "Master seed");
        sub->add_option("--rounds", o.rounds, "Number of rounds");
        sub->add_option("--out", o.out, "Output directory");
        sub->add_flag("--quiet", o.quiet, "Suppress progress output");
        if (run_flags) {
            sub->add_option("--resume", o.resume, "Resume from snapshot.json");
            sub->add_option("--snapshot-at", o.snapshot_at, "Stop after this round and write a snapshot");
        }
    };
    common(app.add_subcommand("simulate", "Run against a simulated world"), true);
    common(app.add_subcommand("optimize", "Run with live prompts and judges"), true);
    common(app.add_subcommand("compare", "Compare samplers over seeds"), false);
    auto* report = app.add_subcommand("report", "Regenerate report.csv/json from a run directory");
    report->add_option("--from", o.from, "Run directory (defaults to --out)");
    report->add_option("--out", o.out, "Output directory");
    report->add_flag("--quiet", o.quiet, "Suppress progress output");
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    common(serve, false);
    serve->add_option("--resume", o.resume, "Resume from snapshot.json");
    common(app.add_subcommand("validate-config", "Check a config and print it normalized"), false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? ok : config_error;
    }
    o.verb = app.get_subcommands().front()->get_name();

    try {
        if (o.verb == "simulate" || o.verb == "optimize") {
            return run_engine(o, in, out, err);
        }
        if (o.verb == "compare") {
            return run_compare(o, in, out);
        }
        if (o.verb == "report") {
            return run_report(o);
        }
        if (o.verb == "serve") {
            return run_serve(o, in, out, err);
        }
        out << to_json(load(o, in)).dump(2) << '\n';
        return ok;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return runtime_error;
    }
}

} // namespace duelopt::cli
