#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "duelopt/errors.hpp"
#include "duelopt/judges.hpp"
#include "duelopt/ledger.hpp"
#include "duelopt/prompt.hpp"
#include "duelopt/rng.hpp"
#include "duelopt/worldmodel.hpp"

namespace duelopt {

enum class MutationMode { none, latent, llm, scripted };

/// Which arms act as parents: the ranking leaders or the ranking tail.
enum class ParentRule { top, bottom };

inline std::string_view to_string(MutationMode m)
{
    switch (m) {
    case MutationMode::none: return "none";
    case MutationMode::latent: return "latent";
    case MutationMode::llm: return "llm";
    case MutationMode::scripted: return "scripted";
    }
    return "?";
}

inline MutationMode mutation_mode_from_string(std::string_view s)
{
    if (s == "none") return MutationMode::none;
    if (s == "latent") return MutationMode::latent;
    if (s == "llm") return MutationMode::llm;
    if (s == "scripted") return MutationMode::scripted;
    throw std::invalid_argument("unknown mutation mode '" + std::string(s) + "'");
}

inline std::string_view to_string(ParentRule p) { return p == ParentRule::top ? "top" : "bottom"; }

inline ParentRule parent_rule_from_string(std::string_view s)
{
    if (s == "top") return ParentRule::top;
    if (s == "bottom") return ParentRule::bottom;
    throw std::invalid_argument("unknown parent rule '" + std::string(s) + "'");
}

struct MutationPolicy {
    MutationMode mode = MutationMode::none;
    std::size_t period = 10;
    std::size_t n_new = 10;
    std::size_t n_prune = 0;
    std::size_t top_k = 3;
    double eta = 0.3;
    ParentRule parents = ParentRule::top;

    bool enabled() const { return mode != MutationMode::none; }

    /// Events fire after rounds that are multiples of the period, except the
    /// final round (children added then would never be dueled).
    bool due(std::size_t round, std::size_t total_rounds) const
    {
        return enabled() && round % period == 0 && round < total_rounds;
    }

    void validate() const
    {
        detail::ensure(period >= 1, "mutation.period must be >= 1");
        detail::ensure(n_new >= 1, "mutation.n_new must be >= 1");
        detail::ensure(top_k >= 1, "mutation.top_k must be >= 1");
        if (mode == MutationMode::latent) {
            detail::ensure(eta > 0.0, "mutation.eta must be positive");
        }
    }
};

/// A proposed child before it joins the pool.
struct ChildProposal {
    std::string text;
    std::optional<std::vector<double>> latent;
};

class Mutator {
public:
    virtual ~Mutator() = default;
    /// Throws MutationError, ParseError or TransportError on failure.
    virtual ChildProposal propose(const PromptRecord& parent, Rng& rng) = 0;
    /// Remote calls made so far.
    virtual std::size_t calls() const { return 0; }
};

/// Latent step of length <= eta around the parent.
class LatentMutator : public Mutator {
public:
    LatentMutator(const WorldModel& world, double eta) : world_(world), eta_(eta) {}

    ChildProposal propose(const PromptRecord& parent, Rng& rng) override
    {
        ChildProposal c;
        c.latent = sample_child_latent(world_.arm(parent.id).latent, eta_, rng);
        c.text = parent.text;
        return c;
    }

private:
    const WorldModel& world_;
    double eta_;
};

/// Replays a fixed list of children in order; running out is a failure.
class ScriptedMutator : public Mutator {
public:
    explicit ScriptedMutator(std::vector<ChildProposal> children) : children_(std::move(children)) {}

    ChildProposal propose(const PromptRecord&, Rng&) override
    {
        if (next_ >= children_.size()) {
            throw MutationError("scripted mutator has no children left");
        }
        return children_[next_++];
    }

    std::size_t position() const { return next_; }
    void set_position(std::size_t p) { next_ = p; }

private:
    std::vector<ChildProposal> children_;
    std::size_t next_ = 0;
};

/// Named tip set, e.g. the mutation tips asset.
using TipSet = std::map<std::string, std::string>;

inline TipSet load_tips(const std::string& path)
{
    const auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ParseError(path + ": tip file must be a JSON object of strings");
    }
    TipSet tips;
    for (const auto& [key, value] : j.items()) {
        if (!value.is_string()) {
            throw ParseError(path + ": tip '" + key + "' is not a string");
        }
        tips[key] = value.get<std::string>();
    }
    return tips;
}

/// Renders the mutation template and parses {"mutated_prompt": ...}.
/// Unparseable replies are retried up to endpoint.max_retries times.
inline std::string llm_mutate(const std::string& parent_text, const std::string& tmpl, const std::string& tip,
                              const EndpointConfig& endpoint, const Transport& transport)
{
    const std::string rendered = render_template(tmpl, {{"instructions", parent_text}, {"tip", tip}});
    std::string last_error;
    for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
        const std::string content = chat_complete(endpoint, transport, rendered);
        try {
            const auto obj = extract_json_object(content);
            if (obj.contains("mutated_prompt") && obj["mutated_prompt"].is_string()) {
                auto text = obj["mutated_prompt"].get<std::string>();
                if (!text.empty()) {
                    return text;
                }
            }
            last_error = "response lacks a nonempty 'mutated_prompt'";
        } catch (const ParseError& e) {
            last_error = e.what();
        }
    }
    throw ParseError("mutation reply unusable after retries: " + last_error);
}

/// Text mutation through a chat endpoint; the tip for each child is drawn
/// uniformly from `tip_keys`.
class LlmMutator : public Mutator {
public:
    LlmMutator(EndpointConfig endpoint, Transport transport, std::string tmpl, TipSet tips,
               std::vector<std::string> tip_keys = {})
        : endpoint_(std::move(endpoint)), transport_(std::move(transport)), template_(std::move(tmpl)),
          tips_(std::move(tips)), keys_(std::move(tip_keys))
    {
        if (keys_.empty()) {
            for (const auto& [k, v] : tips_) {
                keys_.push_back(k);
            }
        }
        detail::ensure(!keys_.empty(), "llm mutator needs at least one tip");
        for (const auto& k : keys_) {
            detail::ensure(tips_.count(k) > 0, "unknown mutation tip '" + k + "'");
        }
    }

    ChildProposal propose(const PromptRecord& parent, Rng& rng) override
    {
        const auto& key = keys_[rng.uniform_index(keys_.size())];
        ++calls_;
        ChildProposal c;
        c.text = llm_mutate(parent.text, template_, tips_.at(key), endpoint_, transport_);
        return c;
    }

    std::size_t calls() const override { return calls_; }

private:
    EndpointConfig endpoint_;
    Transport transport_;
    std::string template_;
    TipSet tips_;
    std::vector<std::string> keys_;
    std::size_t calls_ = 0;
};

struct MutationResult {
    std::vector<PromptId> parents;
    std::vector<PromptRecord> added;
    std::vector<PromptRecord> removed; // marked pruned
    std::optional<std::string> warning;
};

/// Parent indices for one event, best first (or worst first for the
/// bottom rule).
inline std::vector<ArmIndex> select_parents(const PreferenceLedger& ledger, const MutationPolicy& policy)
{
    auto order = ledger.ranking();
    if (policy.parents == ParentRule::bottom) {
        std::reverse(order.begin(), order.end());
    }
    order.resize(std::min(order.size(), policy.top_k));
    return order;
}

/// One expand-and-prune event. `pool[i]` must describe ledger arm i. On
/// mutator failure nothing changes and `warning` is set.
inline MutationResult mutation_step(std::vector<PromptRecord>& pool, PreferenceLedger& ledger,
                                    const MutationPolicy& policy, Mutator& mutator, Rng& rng, std::size_t round,
                                    std::uint64_t& next_serial, WorldModel* world = nullptr)
{
    policy.validate();
    detail::ensure(pool.size() == ledger.size(), "mutation_step: pool and ledger disagree");
    detail::ensure(pool.size() > policy.n_prune, "mutation_step: pool too small to prune " +
                                                     std::to_string(policy.n_prune) + " arms");
    MutationResult result;
    const auto order = ledger.ranking();
    const ArmIndex best = order.front();
    const auto parents = select_parents(ledger, policy);
    for (ArmIndex p : parents) {
        result.parents.push_back(pool[p].id);
    }

    std::vector<std::pair<ArmIndex, ChildProposal>> proposals;
    try {
        for (std::size_t c = 0; c < policy.n_new; ++c) {
            const ArmIndex parent = parents[c % parents.size()];
            proposals.emplace_back(parent, mutator.propose(pool[parent], rng));
        }
    } catch (const AuthError&) {
        throw;
    } catch (const std::runtime_error& e) {
        result.parents.clear();
        result.warning = std::string("mutation skipped: ") + e.what();
        return result;
    }

    // Prune victims are chosen on the pre-event ranking; only pre-existing
    // arms other than the leader are eligible.
    std::set<ArmIndex> victims;
    for (auto it = order.rbegin(); it != order.rend() && victims.size() < policy.n_prune; ++it) {
        if (*it != best) {
            victims.insert(*it);
        }
    }

    for (auto& [parent, proposal] : proposals) {
        PromptId id = simulated_arm_id(next_serial);
        while (ledger.index_of(id) || (world && world->contains(id))) {
            id = simulated_arm_id(++next_serial);
        }
        PromptRecord child;
        child.id = id;
        child.text = std::move(proposal.text);
        child.latent = std::move(proposal.latent);
        child.parent = pool[parent].id;
        child.serial = next_serial++;
        child.created_round = round;
        if (world && world->kind() == WorldKind::latent) {
            detail::ensure(child.latent.has_value(), "mutation_step: latent world requires child latents");
            world->register_arm(child.id, *child.latent);
        }
        ledger.expand(child.id);
        pool.push_back(child);
        result.added.push_back(std::move(child));
    }

    ledger.remove(victims);
    std::vector<PromptRecord> kept;
    for (ArmIndex i = 0; i < pool.size(); ++i) {
        if (victims.count(i)) {
            PromptRecord r = pool[i];
            r.status = PromptStatus::pruned;
            r.pruned_round = round;
            result.removed.push_back(std::move(r));
        } else {
            kept.push_back(std::move(pool[i]));
        }
    }
    pool = std::move(kept);
    return result;
}

} // namespace duelopt
