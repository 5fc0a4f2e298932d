#pragma once

#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "json.hpp"

#include "duelopt/errors.hpp"
#include "duelopt/judges.hpp"
#include "duelopt/prompt.hpp"

namespace duelopt {

/// One dataset input for live optimization.
struct LiveInput {
    std::string query;
    std::string context;
    std::optional<std::string> label;
};

/// JSON array of strings, or of objects {"id"?, "text"}.
inline std::vector<PromptRecord> load_prompt_file(const std::string& path)
{
    const auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
        throw ConfigError("live.prompts_file: " + path + " must hold a JSON array");
    }
    std::vector<PromptRecord> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        PromptRecord r;
        r.serial = i;
        r.id = PromptId("p" + std::to_string(i));
        if (j[i].is_string()) {
            r.text = j[i].get<std::string>();
        } else if (j[i].is_object() && j[i].contains("text") && j[i]["text"].is_string()) {
            r.text = j[i]["text"].get<std::string>();
            if (j[i].contains("id")) {
                if (!j[i]["id"].is_string() || !valid_arm_id(j[i]["id"].get<std::string>())) {
                    throw ConfigError("live.prompts_file[" + std::to_string(i) +
                                      "].id: must be a nonempty string of [A-Za-z0-9_.-]");
                }
                r.id = PromptId(j[i]["id"].get<std::string>());
            }
        } else {
            throw ConfigError("live.prompts_file[" + std::to_string(i) + "]: expected a string or {\"text\": ...}");
        }
        for (const auto& prev : out) {
            if (prev.id == r.id) {
                throw ConfigError("live.prompts_file[" + std::to_string(i) + "].id: duplicate id " + r.id.value);
            }
        }
        out.push_back(std::move(r));
    }
    if (out.size() < 2) {
        throw ConfigError("live.prompts_file: need at least two prompts");
    }
    return out;
}

/// JSON array of strings, or of objects {"query", "context"?, "label"?}.
inline std::vector<LiveInput> load_input_file(const std::string& path)
{
    const auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
        throw ConfigError("live.inputs_file: " + path + " must hold a JSON array");
    }
    std::vector<LiveInput> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        LiveInput in;
        const auto& e = j[i];
        if (e.is_string()) {
            in.query = e.get<std::string>();
        } else if (e.is_object() && e.contains("query") && e["query"].is_string()) {
            in.query = e["query"].get<std::string>();
            if (e.contains("context") && e["context"].is_string()) {
                in.context = e["context"].get<std::string>();
            }
            if (e.contains("label") && !e["label"].is_null()) {
                in.label = e["label"].is_string() ? e["label"].get<std::string>() : e["label"].dump();
            }
        } else {
            throw ConfigError("live.inputs_file[" + std::to_string(i) + "]: expected a string or {\"query\": ...}");
        }
        out.push_back(std::move(in));
    }
    if (out.empty()) {
        throw ConfigError("live.inputs_file: no inputs");
    }
    return out;
}

/// Splits a model response into (answer, reasoning). With a pattern, the
/// answer is the first capture group of the last match; otherwise the whole
/// response is the answer.
inline CandidateResponse split_response(const std::string& text, const std::string& answer_pattern)
{
    CandidateResponse r;
    r.reasoning = text;
    r.answer = text;
    if (answer_pattern.empty()) {
        return r;
    }
    const std::regex re(answer_pattern);
    std::smatch last;
    bool found = false;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        last = *it;
        found = true;
    }
    if (found) {
        r.answer = last.size() > 1 ? last[1].str() : last[0].str();
    }
    return r;
}

} // namespace duelopt
