#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "duelopt/errors.hpp"
#include "duelopt/ledger.hpp"
#include "duelopt/worldmodel.hpp"

namespace duelopt {

/// zeta* - max(zeta_a, zeta_b) with zeta_i = C(i) / (K - 1).
inline double copeland_regret(const TrueScores& truth, std::size_t a, std::size_t b)
{
    const std::size_t k = truth.copeland.size();
    detail::ensure<std::out_of_range>(a < k && b < k, "copeland_regret: arm out of range");
    if (k < 2) {
        return 0.0;
    }
    const double norm = static_cast<double>(k - 1);
    const int best = *std::max_element(truth.copeland.begin(), truth.copeland.end());
    return static_cast<double>(best - std::max(truth.copeland[a], truth.copeland[b])) / norm;
}

inline std::size_t position_of(const std::vector<PromptId>& ids, const PromptId& id)
{
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) {
        throw NotFoundError("unknown arm " + id.value);
    }
    return static_cast<std::size_t>(it - ids.begin());
}

inline double copeland_regret(const WorldModel& world, const std::vector<PromptId>& ids, const PromptId& a,
                              const PromptId& b)
{
    const auto ia = position_of(ids, a);
    const auto ib = position_of(ids, b);
    return copeland_regret(true_scores(world, ids), ia, ib);
}

/// f(p*) - f(selected) from true Borda scores.
inline double borda_regret(const TrueScores& truth, std::size_t selected)
{
    detail::ensure<std::out_of_range>(selected < truth.borda.size(), "borda_regret: arm out of range");
    const double best = *std::max_element(truth.borda.begin(), truth.borda.end());
    return best - truth.borda[selected];
}

inline double borda_regret(const WorldModel& world, const std::vector<PromptId>& ids, const PromptId& selected)
{
    return borda_regret(true_scores(world, ids), position_of(ids, selected));
}

/// 1-based rank of `leader`'s true quality among `ids` (descending); arms
/// of equal quality share the better rank.
inline std::size_t leader_rank(const WorldModel& world, const std::vector<PromptId>& ids, const PromptId& leader)
{
    const double q = world.quality(leader);
    std::size_t better = 0;
    for (const auto& id : ids) {
        if (world.quality(id) > q) {
            ++better;
        }
    }
    return better + 1;
}

inline std::size_t leader_rank(const WorldModel& world, const PreferenceLedger& ledger)
{
    detail::ensure(ledger.size() >= 1, "leader_rank: empty ledger");
    return leader_rank(world, ledger.arm_ids(), ledger.arm_ids()[ledger.current_best()]);
}

/// Shortest round-trip decimal form; "inf", "-inf" and "nan" for
/// non-finite values.
inline std::string format_double(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s)
{
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("not a number: '" + s + "'");
    }
    return v;
}

/// JSON has no infinities; non-finite values travel as strings.
inline nlohmann::json json_number(double v)
{
    if (std::isfinite(v)) {
        return v;
    }
    return format_double(v);
}

inline double number_from_json(const nlohmann::json& j)
{
    if (j.is_number()) {
        return j.get<double>();
    }
    if (j.is_string()) {
        return parse_double(j.get<std::string>());
    }
    throw ParseError("expected a number");
}

} // namespace duelopt
