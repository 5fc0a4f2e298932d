#pragma once

#include <cctype>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace duelopt {

/// Stable identity of a candidate prompt. Matrix indices change when the pool
/// is pruned; PromptIds never do.
struct PromptId {
    std::string value;

    PromptId() = default;
    explicit PromptId(std::string v) : value(std::move(v)) {}

    friend auto operator<=>(const PromptId&, const PromptId&) = default;
    friend bool operator==(const PromptId&, const PromptId&) = default;
};

using ArmIndex = std::size_t;

/// Ids go into CSV cells and URLs unescaped, so they are restricted to
/// [A-Za-z0-9_.-]; "tie" is reserved by the duel log.
inline bool valid_arm_id(const std::string& s)
{
    if (s.empty() || s == "tie") {
        return false;
    }
    for (unsigned char c : s) {
        if (!(std::isalnum(c) || c == '_' || c == '-' || c == '.')) {
            return false;
        }
    }
    return true;
}

enum class PromptStatus { active, pruned };

/// One candidate arm.
struct PromptRecord {
    PromptId id;
    std::string text;
    std::optional<std::vector<double>> latent; // simulation only
    std::optional<PromptId> parent;
    PromptStatus status = PromptStatus::active;
    std::uint64_t serial = 0;       // creation order, unique per run
    std::size_t created_round = 0;  // 0 for the initial pool
    std::optional<std::size_t> pruned_round;

    friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

} // namespace duelopt

template <>
struct std::hash<duelopt::PromptId> {
    std::size_t operator()(const duelopt::PromptId& id) const noexcept
    {
        return std::hash<std::string>{}(id.value);
    }
};
