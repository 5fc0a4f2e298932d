#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "duelopt/batching.hpp"
#include "duelopt/behavioral.hpp"
#include "duelopt/errors.hpp"
#include "duelopt/judges.hpp"
#include "duelopt/mutation.hpp"
#include "duelopt/samplers.hpp"
#include "duelopt/stopping.hpp"
#include "duelopt/worldmodel.hpp"

namespace duelopt {

using nlohmann::json;

enum class FoldMode { per_input, aggregate };
enum class JudgeKind { simulated, oracle, remote, human };

inline std::string_view to_string(FoldMode f) { return f == FoldMode::per_input ? "per_input" : "aggregate"; }

inline FoldMode fold_mode_from_string(std::string_view s)
{
    if (s == "per_input") return FoldMode::per_input;
    if (s == "aggregate") return FoldMode::aggregate;
    throw std::invalid_argument("must be \"per_input\" or \"aggregate\"");
}

inline std::string_view to_string(JudgeKind k)
{
    switch (k) {
    case JudgeKind::simulated: return "simulated";
    case JudgeKind::oracle: return "oracle";
    case JudgeKind::remote: return "remote";
    case JudgeKind::human: return "human";
    }
    return "?";
}

inline JudgeKind judge_kind_from_string(std::string_view s)
{
    if (s == "simulated") return JudgeKind::simulated;
    if (s == "oracle") return JudgeKind::oracle;
    if (s == "remote") return JudgeKind::remote;
    if (s == "human") return JudgeKind::human;
    throw std::invalid_argument("must be one of simulated, oracle, remote, human");
}

struct JudgeSpec {
    JudgeKind kind = JudgeKind::simulated;
    double accuracy = 1.0;
    double label_fraction = 0.0;
    EndpointConfig endpoint;
    bool split_by_answer = false;
    bool parallel = false;
};

struct WorldSpec {
    WorldKind kind = WorldKind::latent;
    LatentWorldSpec latent;
    std::optional<std::uint64_t> seed; // defaults to the run seed
    std::vector<std::string> ids;      // explicit worlds; p0.. when empty
    std::vector<std::vector<double>> mu;
    std::optional<std::vector<double>> utilities;
    std::size_t n_inputs = 1000;
};

struct LiveSpec {
    std::string prompts_file;
    std::string inputs_file;
    EndpointConfig generator;
    std::string templates_dir;
    std::size_t cache_examples = 0; // B: inputs pre-generated for every new prompt
    std::string answer_pattern;     // regex whose first group extracts the final answer
};

struct ServeSpec {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string token;
    std::string cors_origin = "*";
    std::string mode = "human_judge"; // or "observe"
};

struct CompareSpec {
    std::vector<SamplerKind> samplers = {SamplerKind::dts_copeland, SamplerKind::rucb, SamplerKind::random};
    std::size_t n_seeds = 10;
};

inline std::map<JudgeSource, double> default_gamma_by_source()
{
    return {{JudgeSource::answer, 0.5},
            {JudgeSource::reasoning, 0.2},
            {JudgeSource::label, 0.5},
            {JudgeSource::simulated, 0.5},
            {JudgeSource::human, 0.5}};
}

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t rounds = 30;
    std::size_t duels_per_round = 50;
    FoldMode fold = FoldMode::per_input;
    SamplerConfig sampler;
    BatchPolicy batch;
    MutationPolicy mutation;
    std::vector<std::string> mutation_tips;
    std::vector<ChildProposal> mutation_script;
    StoppingConfig stopping;
    BehavioralConfig behavioral;
    JudgeSpec judge;
    std::map<JudgeSource, double> gamma_by_source = default_gamma_by_source();
    WorldSpec world;
    LiveSpec live;
    ServeSpec serve;
    CompareSpec compare;

    std::uint64_t world_seed() const { return world.seed.value_or(seed); }

    bool simulated() const { return judge.kind != JudgeKind::remote && live.prompts_file.empty(); }

    double gamma(JudgeSource s) const
    {
        const auto it = gamma_by_source.find(s);
        return it == gamma_by_source.end() ? 0.5 : it->second;
    }

    /// Throws ConfigError naming the offending field.
    void validate() const
    {
        auto check = [](bool ok, const std::string& msg) {
            if (!ok) {
                throw ConfigError(msg);
            }
        };
        check(rounds >= 1, "rounds: must be >= 1");
        check(duels_per_round >= 1, "duels_per_round: must be >= 1");
        check(sampler.alpha > 0.0, "sampler.alpha: must be positive");
        for (const auto& [src, g] : gamma_by_source) {
            check(g >= 0.0 && g <= 0.5,
                  "gamma_by_source." + std::string(to_string(src)) + ": must lie in [0, 0.5]");
        }
        check(judge.label_fraction >= 0.0 && judge.label_fraction <= 1.0, "judge.label_fraction: must lie in [0, 1]");
        check(judge.accuracy >= 0.5 && judge.accuracy <= 1.0, "judge.accuracy: must lie in [0.5, 1]");
        check(behavioral.n_min >= 0.0, "behavioral.n_min: must be >= 0");
        check(behavioral.prune_threshold >= 0.0, "behavioral.prune_threshold: must be >= 0");
        check(behavioral.rho0 > 0.0, "behavioral.rho0: must be positive");
        check(behavioral.alpha_exp > 0.0, "behavioral.alpha_exp: must be positive");
        check(world.n_inputs >= 1, "world.n_inputs: must be >= 1");
        if (simulated() && world.kind == WorldKind::latent) {
            check(world.latent.k >= 2, "world.k: must be >= 2");
            check(world.latent.latent_dim >= 1, "world.latent_dim: must be >= 1");
            check(world.latent.tau > 0.0, "world.tau: must be positive");
            check(world.latent.lambda > 0.0, "world.lambda: must be positive");
            check(world.latent.radius >= std::max(world.latent.min_gap / world.latent.lambda, world.latent.exclusion),
                  "world.radius: must be at least max(min_gap / lambda, exclusion)");
        }
        if (simulated() && world.kind == WorldKind::explicit_matrix) {
            check(world.mu.size() >= 2, "world.mu: need at least a 2x2 matrix");
            check(world.ids.empty() || world.ids.size() == world.mu.size(), "world.ids: length must match world.mu");
            std::set<std::string> distinct(world.ids.begin(), world.ids.end());
            check(distinct.size() == world.ids.size(), "world.ids: ids must be distinct");
            for (std::size_t i = 0; i < world.ids.size(); ++i) {
                check(valid_arm_id(world.ids[i]),
                      "world.ids[" + std::to_string(i) + "]: must be a nonempty string of [A-Za-z0-9_.-]");
            }
            std::vector<PromptId> ids;
            for (std::size_t i = 0; i < world.mu.size(); ++i) {
                ids.push_back(simulated_arm_id(i));
            }
            try {
                (void)WorldModel::explicit_matrix(ids, world.mu, world.utilities);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("world.mu: ") + e.what());
            }
        }
        if (judge.kind == JudgeKind::oracle) {
            check(world.kind == WorldKind::latent || world.utilities.has_value(),
                  "judge.kind: oracle judge needs world utilities");
        }
        if (judge.kind == JudgeKind::remote) {
            check(!live.prompts_file.empty(), "live.prompts_file: required for the remote judge");
            check(!live.inputs_file.empty(), "live.inputs_file: required for the remote judge");
            check(!judge.endpoint.url.empty(), "judge.endpoint.url: required for the remote judge");
            check(!live.generator.url.empty(), "live.generator.url: required for the remote judge");
        }
        if (mutation.mode == MutationMode::llm) {
            check(!judge.endpoint.url.empty() || !live.generator.url.empty(),
                  "mutation.mode: llm mutation needs an endpoint");
        }
        if (mutation.mode == MutationMode::latent) {
            check(simulated() && world.kind == WorldKind::latent, "mutation.mode: latent mutation needs a latent world");
        }
        check(serve.port >= 0 && serve.port <= 65535, "serve.port: must lie in [0, 65535]");
        check(serve.mode == "human_judge" || serve.mode == "observe", "serve.mode: must be human_judge or observe");
        check(compare.n_seeds >= 1, "compare.n_seeds: must be >= 1");
        check(!compare.samplers.empty(), "compare.samplers: must be nonempty");
        auto rethrow = [](auto&& fn) {
            try {
                fn();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string(e.what()));
            }
        };
        rethrow([&] { batch.validate(); });
        rethrow([&] { mutation.validate(); });
        rethrow([&] { stopping.validate(); });
    }
};

namespace detail {

/// Typed field access with dotted-path error messages; unknown keys are
/// reported by finish().
class FieldReader {
public:
    FieldReader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            throw ConfigError((path_.empty() ? std::string("config") : path_) + ": expected an object");
        }
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return j_.contains(key); }

    void require(const std::string& key) const
    {
        if (!has(key)) {
            throw ConfigError(field(key) + ": missing");
        }
    }

    template <class T>
    void read(const std::string& key, T& out)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) {
            return;
        }
        out = convert<T>(*it, field(key));
    }

    template <class T>
    void read(const std::string& key, std::optional<T>& out)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) {
            return;
        }
        out = convert<T>(*it, field(key));
    }

    template <class T, class Parse>
    void read_enum(const std::string& key, T& out, Parse parse)
    {
        std::optional<std::string> s;
        read(key, s);
        if (!s) {
            return;
        }
        try {
            out = parse(*s);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(field(key) + ": " + e.what());
        }
    }

    FieldReader sub(const std::string& key)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        return FieldReader(it == j_.end() ? empty() : *it, field(key));
    }

    const json* raw(const std::string& key)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) {
                throw ConfigError(field(k) + ": unknown field");
            }
        }
    }

    template <class T>
    static T convert(const json& v, const std::string& where)
    {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
                throw ConfigError(where + ": expected a nonnegative integer");
            }
            return v.get<T>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
            return v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where + ": expected a number");
            return v.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(where + ": expected a string");
            return v.get<std::string>();
        } else {
            try {
                return v.get<T>();
            } catch (const json::exception&) {
                throw ConfigError(where + ": wrong type");
            }
        }
    }

private:
    static const json& empty()
    {
        static const json e = json::object();
        return e;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void read_endpoint(FieldReader r, EndpointConfig& e)
{
    r.read("url", e.url);
    r.read("model", e.model);
    r.read("temperature", e.temperature);
    r.read("timeout_s", e.timeout_s);
    r.read("max_retries", e.max_retries);
    r.finish();
    if (e.max_retries < 0) {
        throw ConfigError(r.field("max_retries") + ": must be >= 0");
    }
}

inline json endpoint_json(const EndpointConfig& e)
{
    // The API key is never serialized; it comes from the environment.
    return {{"url", e.url},
            {"model", e.model},
            {"temperature", e.temperature},
            {"timeout_s", e.timeout_s},
            {"max_retries", e.max_retries}};
}

inline std::vector<std::vector<double>> read_matrix(const json& v, const std::string& where)
{
    if (!v.is_array()) {
        throw ConfigError(where + ": expected an array of rows");
    }
    std::vector<std::vector<double>> m;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& row = v[i];
        if (!row.is_array()) {
            throw ConfigError(where + "[" + std::to_string(i) + "]: expected an array");
        }
        std::vector<double> r;
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (!row[j].is_number()) {
                throw ConfigError(where + "[" + std::to_string(i) + "][" + std::to_string(j) + "]: expected a number");
            }
            r.push_back(row[j].get<double>());
        }
        m.push_back(std::move(r));
    }
    return m;
}

} // namespace detail

/// Builds a RunConfig from a JSON document. Only sampler.kind is required;
/// every other field has a default. Relative file paths resolve against
/// `base_dir`.
inline RunConfig parse_config(const json& doc, const std::string& base_dir = "")
{
    using detail::FieldReader;
    auto resolve = [&](const std::string& p) {
        if (p.empty() || p.front() == '/' || base_dir.empty()) {
            return p;
        }
        return base_dir + "/" + p;
    };
    RunConfig c;
    FieldReader root(doc, "");
    root.read("seed", c.seed);
    root.read("rounds", c.rounds);
    root.read("duels_per_round", c.duels_per_round);
    root.read_enum("fold", c.fold, fold_mode_from_string);

    {
        root.require("sampler");
        auto r = root.sub("sampler");
        r.require("kind");
        r.read_enum("kind", c.sampler.kind, sampler_kind_from_string);
        r.read("alpha", c.sampler.alpha);
        r.finish();
    }
    {
        auto r = root.sub("batch");
        r.read_enum("mode", c.batch.mode, [](const std::string& s) {
            if (s == "fixed") return BatchMode::fixed;
            if (s == "adaptive") return BatchMode::adaptive;
            throw std::invalid_argument("must be \"fixed\" or \"adaptive\"");
        });
        r.read("m", c.batch.fixed_m);
        r.read("c_prime", c.batch.c_prime);
        r.read("m_min", c.batch.m_min);
        r.read("m_max", c.batch.m_max);
        r.finish();
    }
    {
        auto r = root.sub("mutation");
        r.read_enum("mode", c.mutation.mode, mutation_mode_from_string);
        r.read("period", c.mutation.period);
        r.read("n_new", c.mutation.n_new);
        r.read("n_prune", c.mutation.n_prune);
        r.read("top_k", c.mutation.top_k);
        r.read("eta", c.mutation.eta);
        r.read_enum("parents", c.mutation.parents, parent_rule_from_string);
        r.read("tips", c.mutation_tips);
        if (const json* script = r.raw("script")) {
            if (!script->is_array()) {
                throw ConfigError("mutation.script: expected an array");
            }
            for (std::size_t i = 0; i < script->size(); ++i) {
                const std::string where = "mutation.script[" + std::to_string(i) + "]";
                FieldReader item((*script)[i], where);
                ChildProposal p;
                item.require("text");
                item.read("text", p.text);
                item.read("latent", p.latent);
                item.finish();
                c.mutation_script.push_back(std::move(p));
            }
        }
        r.finish();
    }
    {
        auto r = root.sub("stopping");
        r.read("epsilon_target", c.stopping.epsilon_target);
        r.read("delta", c.stopping.delta);
        r.read("cover_trigger", c.stopping.cover_trigger);
        r.read("pac_trigger", c.stopping.pac_trigger);
        r.read("bonferroni", c.stopping.bonferroni);
        r.finish();
    }
    {
        auto r = root.sub("behavioral");
        r.read("n_min", c.behavioral.n_min);
        r.read("prune_threshold", c.behavioral.prune_threshold);
        r.read("rho0", c.behavioral.rho0);
        r.read("alpha_exp", c.behavioral.alpha_exp);
        r.finish();
    }
    {
        auto r = root.sub("judge");
        r.read_enum("kind", c.judge.kind, judge_kind_from_string);
        r.read("accuracy", c.judge.accuracy);
        r.read("label_fraction", c.judge.label_fraction);
        r.read("split_by_answer", c.judge.split_by_answer);
        r.read("parallel", c.judge.parallel);
        detail::read_endpoint(r.sub("endpoint"), c.judge.endpoint);
        r.finish();
    }
    if (const json* g = root.raw("gamma_by_source")) {
        if (!g->is_object()) {
            throw ConfigError("gamma_by_source: expected an object");
        }
        for (const auto& [k, v] : g->items()) {
            JudgeSource src{};
            try {
                src = judge_source_from_string(k);
            } catch (const std::invalid_argument&) {
                throw ConfigError("gamma_by_source." + k + ": unknown judge source");
            }
            c.gamma_by_source[src] = FieldReader::convert<double>(v, "gamma_by_source." + k);
        }
    }
    {
        auto r = root.sub("world");
        std::string kind = "latent";
        r.read("kind", kind);
        r.read("seed", c.world.seed);
        r.read("n_inputs", c.world.n_inputs);
        auto& l = c.world.latent;
        r.read("k", l.k);
        r.read("latent_dim", l.latent_dim);
        r.read("tau", l.tau);
        r.read("lambda", l.lambda);
        r.read("u_max", l.u_max);
        r.read("radius", l.radius);
        r.read("min_gap", l.min_gap);
        r.read("exclusion", l.exclusion);
        r.read("include_optimum", l.include_optimum);
        r.read("ids", c.world.ids);
        r.read("utilities", c.world.utilities);
        const json* mu = r.raw("mu");
        std::string file;
        r.read("file", file);
        if (kind == "latent") {
            c.world.kind = WorldKind::latent;
        } else if (kind == "explicit") {
            c.world.kind = WorldKind::explicit_matrix;
            if (mu) {
                c.world.mu = detail::read_matrix(*mu, "world.mu");
            } else if (!file.empty()) {
                const std::string path = resolve(file);
                std::ifstream in(path);
                if (!in) {
                    throw ConfigError("world.file: cannot open " + path);
                }
                const json fj = json::parse(in, nullptr, false);
                if (fj.is_discarded() || !fj.is_object() || !fj.contains("mu")) {
                    throw ConfigError("world.file: expected a JSON object with a \"mu\" matrix");
                }
                c.world.mu = detail::read_matrix(fj["mu"], "world.file.mu");
                if (fj.contains("utilities")) {
                    c.world.utilities = FieldReader::convert<std::vector<double>>(fj["utilities"], "world.file.utilities");
                }
                if (fj.contains("ids")) {
                    c.world.ids = FieldReader::convert<std::vector<std::string>>(fj["ids"], "world.file.ids");
                }
            } else {
                throw ConfigError("world.mu: explicit worlds need \"mu\" or \"file\"");
            }
        } else {
            throw ConfigError("world.kind: must be \"latent\" or \"explicit\"");
        }
        r.finish();
    }
    {
        auto r = root.sub("live");
        r.read("prompts_file", c.live.prompts_file);
        r.read("inputs_file", c.live.inputs_file);
        r.read("templates_dir", c.live.templates_dir);
        r.read("cache_examples", c.live.cache_examples);
        r.read("answer_pattern", c.live.answer_pattern);
        detail::read_endpoint(r.sub("generator"), c.live.generator);
        r.finish();
        c.live.prompts_file = resolve(c.live.prompts_file);
        c.live.inputs_file = resolve(c.live.inputs_file);
        c.live.templates_dir = resolve(c.live.templates_dir);
    }
    {
        auto r = root.sub("serve");
        r.read("host", c.serve.host);
        r.read("port", c.serve.port);
        r.read("token", c.serve.token);
        r.read("cors_origin", c.serve.cors_origin);
        r.read("mode", c.serve.mode);
        r.finish();
    }
    {
        auto r = root.sub("compare");
        if (const json* s = r.raw("samplers")) {
            if (!s->is_array()) {
                throw ConfigError("compare.samplers: expected an array");
            }
            c.compare.samplers.clear();
            for (std::size_t i = 0; i < s->size(); ++i) {
                const std::string where = "compare.samplers[" + std::to_string(i) + "]";
                try {
                    c.compare.samplers.push_back(
                        sampler_kind_from_string(FieldReader::convert<std::string>((*s)[i], where)));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(where + ": " + e.what());
                }
            }
        }
        r.read("n_seeds", c.compare.n_seeds);
        r.finish();
    }
    root.finish();
    c.sampler.seed = c.seed;
    c.world.latent.seed = c.world_seed();
    c.validate();
    return c;
}

/// Normalized JSON form; parse_config(to_json(c)) reproduces c.
inline json to_json(const RunConfig& c)
{
    json j;
    j["seed"] = c.seed;
    j["rounds"] = c.rounds;
    j["duels_per_round"] = c.duels_per_round;
    j["fold"] = to_string(c.fold);
    j["sampler"] = {{"kind", to_string(c.sampler.kind)}, {"alpha", c.sampler.alpha}};
    j["batch"] = {{"mode", c.batch.mode == BatchMode::fixed ? "fixed" : "adaptive"},
                  {"m", c.batch.fixed_m},
                  {"c_prime", c.batch.c_prime},
                  {"m_min", c.batch.m_min},
                  {"m_max", c.batch.m_max}};
    json script = json::array();
    for (const auto& p : c.mutation_script) {
        json item = {{"text", p.text}};
        if (p.latent) {
            item["latent"] = *p.latent;
        }
        script.push_back(item);
    }
    j["mutation"] = {{"mode", to_string(c.mutation.mode)},   {"period", c.mutation.period},
                     {"n_new", c.mutation.n_new},            {"n_prune", c.mutation.n_prune},
                     {"top_k", c.mutation.top_k},            {"eta", c.mutation.eta},
                     {"parents", to_string(c.mutation.parents)}, {"tips", c.mutation_tips},
                     {"script", script}};
    j["stopping"] = {{"epsilon_target", c.stopping.epsilon_target},
                     {"delta", c.stopping.delta},
                     {"cover_trigger", c.stopping.cover_trigger},
                     {"pac_trigger", c.stopping.pac_trigger},
                     {"bonferroni", c.stopping.bonferroni}};
    j["behavioral"] = {{"n_min", c.behavioral.n_min},
                       {"prune_threshold", c.behavioral.prune_threshold},
                       {"rho0", c.behavioral.rho0},
                       {"alpha_exp", c.behavioral.alpha_exp}};
    j["judge"] = {{"kind", to_string(c.judge.kind)},
                  {"accuracy", c.judge.accuracy},
                  {"label_fraction", c.judge.label_fraction},
                  {"split_by_answer", c.judge.split_by_answer},
                  {"parallel", c.judge.parallel},
                  {"endpoint", detail::endpoint_json(c.judge.endpoint)}};
    json gamma = json::object();
    for (const auto& [src, g] : c.gamma_by_source) {
        gamma[std::string(to_string(src))] = g;
    }
    j["gamma_by_source"] = gamma;
    const auto& l = c.world.latent;
    json world = {{"kind", c.world.kind == WorldKind::latent ? "latent" : "explicit"},
                  {"n_inputs", c.world.n_inputs},
                  {"k", l.k},
                  {"latent_dim", l.latent_dim},
                  {"tau", l.tau},
                  {"lambda", l.lambda},
                  {"u_max", l.u_max},
                  {"radius", l.radius},
                  {"min_gap", l.min_gap},
                  {"exclusion", l.exclusion},
                  {"include_optimum", l.include_optimum}};
    if (c.world.seed) {
        world["seed"] = *c.world.seed;
    }
    if (c.world.kind == WorldKind::explicit_matrix) {
        world["mu"] = c.world.mu;
        if (!c.world.ids.empty()) {
            world["ids"] = c.world.ids;
        }
    }
    if (c.world.utilities) {
        world["utilities"] = *c.world.utilities;
    }
    j["world"] = world;
    j["live"] = {{"prompts_file", c.live.prompts_file},
                 {"inputs_file", c.live.inputs_file},
                 {"templates_dir", c.live.templates_dir},
                 {"cache_examples", c.live.cache_examples},
                 {"answer_pattern", c.live.answer_pattern},
                 {"generator", detail::endpoint_json(c.live.generator)}};
    j["serve"] = {{"host", c.serve.host},
                  {"port", c.serve.port},
                  {"token", c.serve.token},
                  {"cors_origin", c.serve.cors_origin},
                  {"mode", c.serve.mode}};
    json samplers = json::array();
    for (auto k : c.compare.samplers) {
        samplers.push_back(to_string(k));
    }
    j["compare"] = {{"samplers", samplers}, {"n_seeds", c.compare.n_seeds}};
    return j;
}

/// Applies one dotted override "a.b.c=value". The value is read as JSON
/// when it parses, otherwise as a plain string.
inline void apply_override(json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "': expected KEY=VALUE");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }
    json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) {
            throw ConfigError("override '" + assignment + "': empty path component");
        }
        if (!node->is_object()) {
            if (!node->is_null()) {
                throw ConfigError("override '" + key + "': " + part + " is inside a non-object value");
            }
            *node = json::object();
        }
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

inline std::string parent_dir(const std::string& path)
{
    const auto slash = path.rfind('/');
    if (slash == std::string::npos) {
        return ".";
    }
    return slash == 0 ? "/" : path.substr(0, slash);
}

inline json read_config_document(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open " + path);
    }
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw ConfigError("config: " + path + " is not valid JSON");
    }
    return doc;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {})
{
    json doc = read_config_document(path);
    for (const auto& o : overrides) {
        apply_override(doc, o);
    }
    return parse_config(doc, parent_dir(path));
}

} // namespace duelopt
