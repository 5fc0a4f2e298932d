#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "duelopt/errors.hpp"
#include "duelopt/ledger.hpp"
#include "duelopt/rng.hpp"
#include "duelopt/samplers.hpp"
#include "duelopt/worldmodel.hpp"

namespace duelopt {

enum class JudgeSource { answer, reasoning, label, simulated, human };

/// Per-input decision relative to the ticket's (first, second) pair.
enum class Verdict { first, second, tie };

inline std::string_view to_string(JudgeSource s)
{
    switch (s) {
    case JudgeSource::answer: return "answer";
    case JudgeSource::reasoning: return "reasoning";
    case JudgeSource::label: return "label";
    case JudgeSource::simulated: return "simulated";
    case JudgeSource::human: return "human";
    }
    return "?";
}

inline JudgeSource judge_source_from_string(std::string_view s)
{
    if (s == "answer") return JudgeSource::answer;
    if (s == "reasoning") return JudgeSource::reasoning;
    if (s == "label") return JudgeSource::label;
    if (s == "simulated") return JudgeSource::simulated;
    if (s == "human") return JudgeSource::human;
    throw std::invalid_argument("unknown judge source '" + std::string(s) + "'");
}

/// One scheduled comparison. swapped[k] means the first arm is shown in
/// position B (Y) for input k.
struct DuelTicket {
    std::uint64_t duel_id = 0;
    std::size_t round = 0;
    std::uint64_t t = 1; // global duel index, drives the confidence bonus
    ArmIndex first = 0;
    ArmIndex second = 1;
    PromptId first_id;
    PromptId second_id;
    std::vector<std::size_t> batch;
    std::vector<bool> swapped;

    friend bool operator==(const DuelTicket&, const DuelTicket&) = default;
};

struct InputJudgment {
    Verdict winner = Verdict::tie;
    JudgeSource source = JudgeSource::simulated;

    friend bool operator==(const InputJudgment&, const InputJudgment&) = default;
};

struct DuelOutcome {
    std::uint64_t duel_id = 0;
    std::vector<InputJudgment> per_input;
    Verdict aggregate = Verdict::tie;
    std::size_t warnings = 0;

    friend bool operator==(const DuelOutcome&, const DuelOutcome&) = default;
};

/// Majority of per-input wins; equal counts are a tie.
inline Verdict majority(const std::vector<InputJudgment>& per_input)
{
    std::size_t a = 0;
    std::size_t b = 0;
    for (const auto& j : per_input) {
        a += j.winner == Verdict::first;
        b += j.winner == Verdict::second;
    }
    if (a == b) {
        return Verdict::tie;
    }
    return a > b ? Verdict::first : Verdict::second;
}

inline DuelOutcome make_outcome(std::uint64_t duel_id, std::vector<InputJudgment> per_input, std::size_t warnings = 0)
{
    DuelOutcome o;
    o.duel_id = duel_id;
    o.per_input = std::move(per_input);
    o.aggregate = majority(o.per_input);
    o.warnings = warnings;
    return o;
}

/// Draws the batch inputs uniformly with replacement and a fair A/B order
/// for each of them.
inline DuelTicket make_ticket(std::uint64_t duel_id, std::size_t round, std::uint64_t t, const DuelChoice& choice,
                              const PreferenceLedger& ledger, std::size_t m, std::size_t n_inputs, Rng& rng)
{
    detail::ensure(m >= 1, "make_ticket: batch must be nonempty");
    detail::ensure(n_inputs >= 1, "make_ticket: no inputs available");
    detail::ensure(choice.first != choice.second, "make_ticket: an arm cannot duel itself");
    DuelTicket ticket;
    ticket.duel_id = duel_id;
    ticket.round = round;
    ticket.t = t;
    ticket.first = choice.first;
    ticket.second = choice.second;
    ticket.first_id = ledger.arm_ids().at(choice.first);
    ticket.second_id = ledger.arm_ids().at(choice.second);
    ticket.batch.reserve(m);
    ticket.swapped.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        ticket.batch.push_back(rng.uniform_index(n_inputs));
        ticket.swapped.push_back(rng.bernoulli(0.5));
    }
    return ticket;
}

class Judge {
public:
    virtual ~Judge() = default;
    virtual DuelOutcome judge(const DuelTicket& ticket, Rng& rng) = 0;
};

/// Probability that the judge reports the true per-input preference.
struct JudgeCalibration {
    double accuracy = 1.0;

    void validate() const
    {
        detail::ensure(accuracy >= 0.5 && accuracy <= 1.0, "judge.accuracy must lie in [0.5, 1]");
    }
};

/// Per input: the first arm wins with probability mu(first, second), then
/// the decision is flipped with probability 1 - accuracy.
class SimulatedJudge : public Judge {
public:
    SimulatedJudge(const WorldModel& world, JudgeCalibration calibration) : world_(world), calibration_(calibration)
    {
        calibration_.validate();
    }

    DuelOutcome judge(const DuelTicket& ticket, Rng& rng) override
    {
        const double mu = world_.mu(ticket.first_id, ticket.second_id);
        std::vector<InputJudgment> out;
        out.reserve(ticket.batch.size());
        for (std::size_t k = 0; k < ticket.batch.size(); ++k) {
            bool first_wins = rng.bernoulli(mu);
            const bool flip = rng.bernoulli(1.0 - calibration_.accuracy);
            if (flip) {
                first_wins = !first_wins;
            }
            out.push_back({first_wins ? Verdict::first : Verdict::second, JudgeSource::simulated});
        }
        return make_outcome(ticket.duel_id, std::move(out));
    }

private:
    const WorldModel& world_;
    JudgeCalibration calibration_;
};

/// Always prefers the arm with the higher true utility; equal utilities tie.
class OracleJudge : public Judge {
public:
    explicit OracleJudge(const WorldModel& world) : world_(world)
    {
        detail::ensure(world.has_utilities(), "oracle judge requires a world with scalar utilities");
    }

    DuelOutcome judge(const DuelTicket& ticket, Rng&) override
    {
        const double a = world_.quality(ticket.first_id);
        const double b = world_.quality(ticket.second_id);
        const Verdict v = a > b ? Verdict::first : (b > a ? Verdict::second : Verdict::tie);
        std::vector<InputJudgment> out(ticket.batch.size(), InputJudgment{v, JudgeSource::simulated});
        return make_outcome(ticket.duel_id, std::move(out));
    }

private:
    const WorldModel& world_;
};

/// Ground-truth correctness lookup for labeled inputs.
class LabelSet {
public:
    virtual ~LabelSet() = default;
    /// Correctness of `arm` on `input`; empty when the label is unknown.
    virtual std::optional<bool> correct(std::size_t input, const PromptId& arm) const = 0;
};

/// Explicit table input -> (arm -> correct).
class MapLabelSet : public LabelSet {
public:
    std::map<std::size_t, std::map<PromptId, bool>> table;

    std::optional<bool> correct(std::size_t input, const PromptId& arm) const override
    {
        const auto row = table.find(input);
        if (row == table.end()) {
            return std::nullopt;
        }
        const auto cell = row->second.find(arm);
        if (cell == row->second.end()) {
            return std::nullopt;
        }
        return cell->second;
    }
};

/// Simulation labels: every arm answers every input, correct with
/// probability equal to its clamped utility (fixed per arm and input).
class WorldLabelSet : public LabelSet {
public:
    explicit WorldLabelSet(const WorldModel& world) : world_(world) {}

    std::optional<bool> correct(std::size_t input, const PromptId& arm) const override
    {
        if (!world_.contains(arm)) {
            return std::nullopt;
        }
        return world_.arm_correct(arm, input);
    }

private:
    const WorldModel& world_;
};

/// Inputs with id < floor(r * n_inputs) are labeled and decided by their
/// labels (correct beats wrong, equal correctness ties); the rest go to the
/// inner judge.
class PartialLabelJudge : public Judge {
public:
    PartialLabelJudge(Judge& inner, const LabelSet& labels, double r, std::size_t n_inputs)
        : inner_(inner), labels_(labels), r_(r), n_inputs_(n_inputs)
    {
        detail::ensure(r >= 0.0 && r <= 1.0, "partial label fraction must lie in [0, 1]");
    }

    bool is_labeled(std::size_t input) const
    {
        return static_cast<double>(input) < std::floor(r_ * static_cast<double>(n_inputs_));
    }

    DuelOutcome judge(const DuelTicket& ticket, Rng& rng) override
    {
        std::vector<std::optional<InputJudgment>> decided(ticket.batch.size());
        DuelTicket rest = ticket;
        rest.batch.clear();
        rest.swapped.clear();
        for (std::size_t k = 0; k < ticket.batch.size(); ++k) {
            const std::size_t input = ticket.batch[k];
            if (!is_labeled(input)) {
                rest.batch.push_back(input);
                rest.swapped.push_back(ticket.swapped[k]);
                continue;
            }
            const auto a = labels_.correct(input, ticket.first_id);
            const auto b = labels_.correct(input, ticket.second_id);
            if (!a || !b) {
                throw NotFoundError("partial labels: labeled input " + std::to_string(input) +
                                    " missing from label set");
            }
            Verdict v = Verdict::tie;
            if (*a && !*b) {
                v = Verdict::first;
            } else if (*b && !*a) {
                v = Verdict::second;
            }
            decided[k] = InputJudgment{v, JudgeSource::label};
        }
        std::size_t warnings = 0;
        std::vector<InputJudgment> inner_results;
        if (!rest.batch.empty()) {
            DuelOutcome inner = inner_.judge(rest, rng);
            inner_results = std::move(inner.per_input);
            warnings = inner.warnings;
        }
        std::vector<InputJudgment> merged;
        merged.reserve(ticket.batch.size());
        std::size_t next = 0;
        for (auto& d : decided) {
            merged.push_back(d ? *d : inner_results.at(next++));
        }
        return make_outcome(ticket.duel_id, std::move(merged), warnings);
    }

private:
    Judge& inner_;
    const LabelSet& labels_;
    double r_;
    std::size_t n_inputs_;
};

// ---------------------------------------------------------------------------
// Remote LLM access

struct HttpRequest {
    std::string url;
    std::string body;
    std::vector<std::pair<std::string, std::string>> headers;
    double timeout_s = 60.0;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// Performs one HTTP POST. Network failures are reported as TransportError.
using Transport = std::function<HttpResponse(const HttpRequest&)>;

struct EndpointConfig {
    std::string url;
    std::string model;
    double temperature = 0.0;
    double timeout_s = 60.0;
    int max_retries = 3;
    std::string api_key;
};

/// {placeholder} substitution; "{{" and "}}" collapse to single braces and
/// unknown placeholders are left untouched.
inline std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values)
{
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        const char c = tmpl[i];
        if (c == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
            out.push_back('{');
            i += 2;
            continue;
        }
        if (c == '}' && i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
            out.push_back('}');
            i += 2;
            continue;
        }
        if (c == '{') {
            const std::size_t close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                const std::string key(tmpl.substr(i + 1, close - i - 1));
                const auto it = values.find(key);
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw NotFoundError("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// First JSON object embedded in free-form model output.
inline nlohmann::json extract_json_object(const std::string& text)
{
    auto parsed = nlohmann::json::parse(text, nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) {
        return parsed;
    }
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ParseError("no JSON object in response");
    }
    parsed = nlohmann::json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
        throw ParseError("malformed JSON object in response");
    }
    return parsed;
}

/// Sends one chat-completions request and returns the assistant content.
/// Transport failures and 5xx/429 responses are retried up to max_retries;
/// 401/403 raise AuthError immediately.
inline std::string chat_complete(const EndpointConfig& endpoint, const Transport& transport, const std::string& user,
                                 const std::string& system = {})
{
    nlohmann::json messages = nlohmann::json::array();
    if (!system.empty()) {
        messages.push_back({{"role", "system"}, {"content", system}});
    }
    messages.push_back({{"role", "user"}, {"content", user}});
    const nlohmann::json body = {
        {"model", endpoint.model}, {"messages", messages}, {"temperature", endpoint.temperature}};
    HttpRequest req;
    req.url = endpoint.url;
    req.body = body.dump();
    req.timeout_s = endpoint.timeout_s;
    req.headers.push_back({"Content-Type", "application/json"});
    if (!endpoint.api_key.empty()) {
        req.headers.push_back({"Authorization", "Bearer " + endpoint.api_key});
    }
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
        HttpResponse resp;
        try {
            resp = transport(req);
        } catch (const TransportError& e) {
            last_error = e.what();
            continue;
        }
        if (resp.status == 401 || resp.status == 403) {
            throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(resp.status) + ")");
        }
        if (resp.status == 429 || resp.status >= 500 || resp.status == 0) {
            last_error = "HTTP " + std::to_string(resp.status);
            continue;
        }
        if (resp.status >= 400) {
            throw TransportError("endpoint returned HTTP " + std::to_string(resp.status) + ": " + resp.body);
        }
        const auto parsed = nlohmann::json::parse(resp.body, nullptr, false);
        if (parsed.is_discarded()) {
            throw ParseError("endpoint body is not JSON");
        }
        try {
            return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw ParseError("endpoint body has no choices[0].message.content");
        }
    }
    throw TransportError("endpoint unavailable after retries: " + last_error);
}

/// Judge prompt templates. `pairwise` is used for free-form answers; the
/// answer/reasoning pair implements the split judge for tasks whose outputs
/// carry an extractable final answer.
struct JudgeTemplates {
    std::string pairwise;
    std::string answer_based;
    std::string reasoning_based;

    static JudgeTemplates load(const std::string& dir)
    {
        JudgeTemplates t;
        t.pairwise = read_text_file(dir + "/judge_pairwise.txt");
        t.answer_based = read_text_file(dir + "/judge_answer.txt");
        t.reasoning_based = read_text_file(dir + "/judge_reasoning.txt");
        return t;
    }
};

/// A prompt's response on one input, as produced by the target model.
struct CandidateResponse {
    std::string answer;
    std::string reasoning;

    friend bool operator==(const CandidateResponse&, const CandidateResponse&) = default;
};

/// Input text shown to the judge.
struct InputText {
    std::string query;
    std::string context;
};

/// Label lookup backed by a callable.
class FunctionLabelSet : public LabelSet {
public:
    using Fn = std::function<std::optional<bool>(std::size_t, const PromptId&)>;
    explicit FunctionLabelSet(Fn fn) : fn_(std::move(fn)) {}
    std::optional<bool> correct(std::size_t input, const PromptId& arm) const override { return fn_(input, arm); }

private:
    Fn fn_;
};

using ResponseProvider = std::function<CandidateResponse(const PromptId&, std::size_t input)>;
using InputProvider = std::function<InputText(std::size_t input)>;
using AnswersEqual = std::function<bool(const std::string&, const std::string&)>;

/// Maps an X/Y verdict back through the presentation order.
inline Verdict unswap(bool x_wins, bool swapped)
{
    const bool first_wins = swapped ? !x_wins : x_wins;
    return first_wins ? Verdict::first : Verdict::second;
}

/// Parses {"winner": "X" | "Y"}; returns true for X.
inline bool parse_winner(const std::string& content)
{
    const auto obj = extract_json_object(content);
    if (!obj.contains("winner") || !obj["winner"].is_string()) {
        throw ParseError("response lacks a string 'winner' field");
    }
    std::string w = obj["winner"].get<std::string>();
    w.erase(std::remove_if(w.begin(), w.end(), [](unsigned char ch) { return std::isspace(ch); }), w.end());
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char ch) { return std::toupper(ch); });
    if (w == "X") {
        return true;
    }
    if (w == "Y") {
        return false;
    }
    throw ParseError("winner must be X or Y, got '" + obj["winner"].get<std::string>() + "'");
}

struct RemoteJudgeOptions {
    bool split_by_answer = false; // use answer/reasoning templates
    bool parallel = false;        // judge the inputs of one ticket concurrently
};

/// LLM-as-judge over HTTP. Malformed verdicts are retried; after the retry
/// budget the input is recorded as a tie and a warning is counted.
class RemoteLlmJudge : public Judge {
public:
    RemoteLlmJudge(EndpointConfig endpoint, JudgeTemplates templates, Transport transport, ResponseProvider responses,
                   InputProvider inputs, RemoteJudgeOptions options = {}, AnswersEqual answers_equal = {})
        : endpoint_(std::move(endpoint)), templates_(std::move(templates)), transport_(std::move(transport)),
          responses_(std::move(responses)), inputs_(std::move(inputs)), options_(options),
          answers_equal_(std::move(answers_equal))
    {
        if (!answers_equal_) {
            answers_equal_ = [](const std::string& a, const std::string& b) { return normalize(a) == normalize(b); };
        }
    }

    DuelOutcome judge(const DuelTicket& ticket, Rng&) override
    {
        const std::size_t m = ticket.batch.size();
        std::vector<std::pair<InputJudgment, bool>> results(m);
        if (options_.parallel && m > 1) {
            std::vector<std::future<std::pair<InputJudgment, bool>>> futures;
            futures.reserve(m);
            for (std::size_t k = 0; k < m; ++k) {
                futures.push_back(std::async(std::launch::async, [this, &ticket, k] { return judge_one(ticket, k); }));
            }
            // Folded in input order regardless of completion order.
            for (std::size_t k = 0; k < m; ++k) {
                results[k] = futures[k].get();
            }
        } else {
            for (std::size_t k = 0; k < m; ++k) {
                results[k] = judge_one(ticket, k);
            }
        }
        std::vector<InputJudgment> per_input;
        std::size_t warnings = 0;
        for (auto& [j, warned] : results) {
            per_input.push_back(j);
            warnings += warned;
        }
        return make_outcome(ticket.duel_id, std::move(per_input), warnings);
    }

    static std::string normalize(std::string s)
    {
        s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); }), s.end());
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
        return s;
    }

private:
    std::pair<InputJudgment, bool> judge_one(const DuelTicket& ticket, std::size_t k) const
    {
        const std::size_t input = ticket.batch[k];
        const bool swapped = ticket.swapped[k];
        const CandidateResponse first = responses_(ticket.first_id, input);
        const CandidateResponse second = responses_(ticket.second_id, input);
        const CandidateResponse& x = swapped ? second : first;
        const CandidateResponse& y = swapped ? first : second;
        const InputText text = inputs_(input);

        std::map<std::string, std::string> values = {
            {"question", text.query},   {"query", text.query},           {"context", text.context},
            {"answer_X", x.answer},     {"answer_Y", y.answer},          {"reasoning_X", x.reasoning},
            {"reasoning_Y", y.reasoning},
        };
        JudgeSource source = JudgeSource::answer;
        const std::string* tmpl = &templates_.pairwise;
        if (options_.split_by_answer) {
            if (answers_equal_(x.answer, y.answer)) {
                tmpl = &templates_.reasoning_based;
                source = JudgeSource::reasoning;
            } else {
                tmpl = &templates_.answer_based;
            }
        }
        const std::string rendered = render_template(*tmpl, values);
        for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
            const std::string content = chat_complete(endpoint_, transport_, rendered);
            try {
                return {{unswap(parse_winner(content), swapped), source}, false};
            } catch (const ParseError&) {
                continue;
            }
        }
        return {{Verdict::tie, JudgeSource::answer}, true};
    }

    EndpointConfig endpoint_;
    JudgeTemplates templates_;
    Transport transport_;
    ResponseProvider responses_;
    InputProvider inputs_;
    RemoteJudgeOptions options_;
    AnswersEqual answers_equal_;
};

// ---------------------------------------------------------------------------
// Human judging

enum class HumanChoice { A, B, tie };

inline HumanChoice human_choice_from_string(std::string_view s)
{
    if (s == "A") return HumanChoice::A;
    if (s == "B") return HumanChoice::B;
    if (s == "tie") return HumanChoice::tie;
    throw std::invalid_argument("choice must be \"A\", \"B\" or \"tie\"");
}

/// Maps a positional choice to the ticket's arms.
inline Verdict human_verdict(HumanChoice choice, bool swapped)
{
    if (choice == HumanChoice::tie) {
        return Verdict::tie;
    }
    return unswap(choice == HumanChoice::A, swapped);
}

/// One blind item shown to a human judge. Carries no arm identity.
struct PendingItem {
    std::uint64_t duel_id = 0;
    std::size_t input_idx = 0; // position within the ticket batch
    std::size_t input = 0;
    std::string input_text;
    std::string payload_a;
    std::string payload_b;
};

/// Renders (arm, input) to the text a human sees for that arm.
using PayloadRenderer = std::function<std::string(const PromptId&, std::size_t input)>;

/// Tickets waiting for human judgments. A ticket's outcome is released once
/// every input in its batch has been judged.
class HumanJudgeQueue {
public:
    void enqueue(const DuelTicket& ticket, const PayloadRenderer& render, const InputProvider& inputs = {})
    {
        if (tickets_.count(ticket.duel_id)) {
            throw ConflictError("duel " + std::to_string(ticket.duel_id) + " is already pending");
        }
        Entry e;
        e.ticket = ticket;
        e.judged.resize(ticket.batch.size());
        for (std::size_t k = 0; k < ticket.batch.size(); ++k) {
            PendingItem item;
            item.duel_id = ticket.duel_id;
            item.input_idx = k;
            item.input = ticket.batch[k];
            item.input_text = inputs ? inputs(item.input).query : "input " + std::to_string(item.input);
            const std::string first = render(ticket.first_id, item.input);
            const std::string second = render(ticket.second_id, item.input);
            item.payload_a = ticket.swapped[k] ? second : first;
            item.payload_b = ticket.swapped[k] ? first : second;
            e.items.push_back(std::move(item));
        }
        tickets_.emplace(ticket.duel_id, std::move(e));
        order_.push_back(ticket.duel_id);
    }

    /// Unjudged items in enqueue order.
    std::vector<PendingItem> pending() const
    {
        std::vector<PendingItem> out;
        for (auto id : order_) {
            const auto& e = tickets_.at(id);
            for (std::size_t k = 0; k < e.items.size(); ++k) {
                if (!e.judged[k]) {
                    out.push_back(e.items[k]);
                }
            }
        }
        return out;
    }

    bool has_pending() const { return !order_.empty(); }
    bool contains(std::uint64_t duel_id) const { return tickets_.count(duel_id) > 0; }

    /// Throws NotFoundError / ConflictError without modifying state.
    void check(std::uint64_t duel_id, std::size_t input_idx) const
    {
        const auto it = tickets_.find(duel_id);
        if (it == tickets_.end()) {
            throw NotFoundError("unknown duel " + std::to_string(duel_id));
        }
        if (input_idx >= it->second.items.size()) {
            throw NotFoundError("duel " + std::to_string(duel_id) + " has no input " + std::to_string(input_idx));
        }
        if (it->second.judged[input_idx]) {
            throw ConflictError("input " + std::to_string(input_idx) + " of duel " + std::to_string(duel_id) +
                                " already judged");
        }
    }

    /// Records a judgment; returns the outcome when the ticket is complete
    /// (the ticket is then removed from the queue).
    std::optional<std::pair<DuelTicket, DuelOutcome>> submit(std::uint64_t duel_id, std::size_t input_idx,
                                                             HumanChoice choice)
    {
        check(duel_id, input_idx);
        auto& e = tickets_.at(duel_id);
        e.judged[input_idx] = InputJudgment{human_verdict(choice, e.ticket.swapped[input_idx]), JudgeSource::human};
        for (const auto& j : e.judged) {
            if (!j) {
                return std::nullopt;
            }
        }
        std::vector<InputJudgment> per_input;
        for (const auto& j : e.judged) {
            per_input.push_back(*j);
        }
        auto result = std::make_pair(e.ticket, make_outcome(duel_id, std::move(per_input)));
        tickets_.erase(duel_id);
        order_.erase(std::find(order_.begin(), order_.end(), duel_id));
        return result;
    }

private:
    struct Entry {
        DuelTicket ticket;
        std::vector<PendingItem> items;
        std::vector<std::optional<InputJudgment>> judged;
    };
    std::map<std::uint64_t, Entry> tickets_;
    std::vector<std::uint64_t> order_;
};

} // namespace duelopt
